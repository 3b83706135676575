#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace corrlab {

using cplx = std::complex<double>;

inline constexpr const char* kVersion = "0.1.0";

/// Bad input: malformed spec, violated precondition, unknown vertex.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that ran but could not produce a trustworthy number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

/// Lattice site (n1, n2) with n1 horizontal, n2 vertical.
struct Vertex {
  int n1 = 0;
  int n2 = 0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
  friend auto operator<=>(const Vertex&, const Vertex&) = default;

  /// |n| = |n1| + |n2|
  [[nodiscard]] int norm1() const { return (n1 < 0 ? -n1 : n1) + (n2 < 0 ? -n2 : n2); }
};

inline std::string to_string(const Vertex& v) {
  return "(" + std::to_string(v.n1) + "," + std::to_string(v.n2) + ")";
}

// splitmix64 finalizer; used for seed substreams and hashing.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace corrlab

template <>
struct std::hash<corrlab::Vertex> {
  std::size_t operator()(const corrlab::Vertex& v) const noexcept {
    return static_cast<std::size_t>(
        corrlab::mix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.n1)) << 32) |
                       static_cast<std::uint32_t>(v.n2)));
  }
};
