#pragma once

// JSON experiment config for the corrlab CLI. Every key is checked; errors
// carry the dotted field path and the source line it was found on.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrlab/boole.hpp"
#include "corrlab/experiments.hpp"

namespace corrlab::cli {

using nlohmann::json;

/// Best-effort line lookup: walks the quoted keys of a path through the raw text.
class Source {
 public:
  Source() = default;
  explicit Source(std::string text) : text_(std::move(text)) {}

  [[nodiscard]] int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const auto& key : path) {
      const std::string quoted = "\"" + key + "\"";
      std::size_t at = pos;
      bool found = false;
      while ((at = text_.find(quoted, at)) != std::string::npos) {
        std::size_t k = at + quoted.size();
        while (k < text_.size() && std::isspace(static_cast<unsigned char>(text_[k]))) ++k;
        if (k < text_.size() && text_[k] == ':') {
          found = true;
          break;
        }
        at += quoted.size();
      }
      if (!found) break;
      pos = at;
    }
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
  }

  [[nodiscard]] int line_at(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(byte), '\n'));
  }

 private:
  std::string text_;
};

class Section {
 public:
  Section(const json& j, std::vector<std::string> path, const Source* src) : j_(j), path_(std::move(path)), src_(src) {
    if (!j_.is_object()) fail_here("expected a section (JSON object)");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
  [[nodiscard]] const Source* source() const { return src_; }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    return need<T>(key);
  }

  template <class T>
  T need(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) fail_here("missing required field '" + dotted(key) + "'");
    return convert<T>(j_.at(key), key);
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) fail_here("missing required section '" + dotted(key) + "'");
    auto p = path_;
    p.push_back(key);
    return Section(j_.at(key), std::move(p), src_);
  }

  [[nodiscard]] const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  /// Unknown keys are errors.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    auto p = path_;
    p.push_back(key);
    throw ValidationError(where(p) + dotted(key) + ": " + what);
  }

  [[noreturn]] void fail_here(const std::string& what) const { throw ValidationError(where(path_) + what); }

  [[nodiscard]] std::string dotted(const std::string& key) const {
    std::string s;
    for (const auto& p : path_) s += p + ".";
    return s + key;
  }

 private:
  [[nodiscard]] std::string where(const std::vector<std::string>& p) const {
    return "config line " + std::to_string(src_ ? src_->line_of(p) : 1) + ": ";
  }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(key, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
      const auto x = v.get<long long>();
      if (x < -2147483647LL || x > 2147483647LL) fail(key, "integer out of range");
      return static_cast<int>(x);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        fail(key, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, cplx>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail(key, "expected [re, im]");
      return {v[0].get<double>(), v[1].get<double>()};
    } else if constexpr (std::is_same_v<T, Vertex>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        fail(key, "expected [n1, n2]");
      return {v[0].get<int>(), v[1].get<int>()};
    } else {
      using E = typename T::value_type;
      if (!v.is_array()) fail(key, "expected a list");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<E>(v[i], key + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const json& j_;
  std::vector<std::string> path_;
  const Source* src_;
  std::set<std::string> seen_;
};

struct RunBlock {
  int realizations = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = ".";
};

struct GreensBlock {
  std::vector<cplx> zs;
  std::vector<Vertex> targets;
  Vertex origin{0, 0};
};

struct DensityBlock {
  std::optional<double> e_min, e_max;
  double step = 1e-3;
  double eta = 1e-4;
  int length = 2000;
};

struct BooleBlock {
  std::string measure_file;  // resolved against the config directory
  int atoms = 5;             // generator, when no file is given
  double alpha = -1.0, beta = 1.0;
  std::vector<double> ts{0.5, 1.0, 2.0, 10.0};
};

struct EstimatorsBlock {
  double s = 0.5;
  cplx z{0.5, 0.05};
  std::vector<Vertex> targets;  // empty: spine (Diag) or bottom row (Sym), distances 1..max_distance
  int max_distance = 10;
  std::vector<int> correlator_distances;  // Sym only
  double c_w = 1.0;
  std::optional<ThresholdPlan> threshold;  // Diag: 1D scan and gamma_0
};

struct ContrastBlock {
  ContrastPlan plan;
};

struct ExperimentConfig {
  std::optional<GraphSpec> model;
  std::optional<DisorderSpec> disorder;
  RunBlock run;
  std::optional<MomentPlan> moments;
  std::optional<GreensBlock> greens;
  std::optional<DensityBlock> density;
  std::optional<BooleBlock> boole;
  std::optional<EstimatorsBlock> estimators;
  std::optional<ContrastBlock> contrast;
  std::string canonical;  // compact dump with sorted keys
  std::uint64_t hash = 0;
};

inline GraphSpec read_model(Section s) {
  GraphSpec g;
  const auto kind = s.need<std::string>("kind");
  try {
    g.kind = parse_model_kind(kind);
  } catch (const ValidationError& e) {
    s.fail("kind", e.what());
  }
  g.gamma = s.need<double>("gamma");
  g.ell = s.get<int>("ell", 1);
  g.cols = s.need<int>("cols");
  g.rows = s.need<int>("rows");
  s.finish();
  if (!(g.gamma > 0.0)) s.fail("gamma", "must be positive");
  if (g.ell < 1) s.fail("ell", "must be >= 1");
  if (g.cols < 2) s.fail("cols", "must be >= 2");
  if (g.rows < 2) s.fail("rows", "must be >= 2");
  if (g.kind == ModelKind::Diag && g.rows < g.ell)
    s.fail("rows", "Diag lattice needs rows >= ell (rows = " + std::to_string(g.rows) + ", ell = " + std::to_string(g.ell) + ")");
  return g;
}

inline DisorderSpec read_disorder(Section s) {
  DisorderSpec d;
  const auto dist = s.get<std::string>("distribution", "uniform");
  if (dist == "uniform")
    d.distribution = Distribution::Uniform;
  else if (dist == "custom")
    d.distribution = Distribution::Custom;
  else
    s.fail("distribution", "expected 'uniform' or 'custom'");
  d.omega_max = s.get<double>("omega_max", 1.0);
  d.density_bins = s.get<std::vector<double>>("density_bins", {});
  s.finish();
  if (d.distribution == Distribution::Uniform && !d.density_bins.empty())
    s.fail("density_bins", "only used with distribution 'custom'");
  try {
    d.validate();
  } catch (const ValidationError& e) {
    s.fail_here(e.what());
  }
  return d;
}

inline std::vector<double> read_times(Section& s, const std::string& key, std::vector<double> fallback) {
  if (!s.has(key)) return s.get<std::vector<double>>(key, std::move(fallback));
  const json& v = s.raw(key);
  if (v.is_array()) return s.get<std::vector<double>>(key, {});
  if (!v.is_object()) s.fail(key, "expected a list or {min, max, count}");
  Section t = s.sub(key);
  const double lo = t.need<double>("min"), hi = t.need<double>("max");
  const int n = t.need<int>("count");
  t.finish();
  if (!(lo > 0.0 && hi > lo)) t.fail("max", "needs 0 < min < max");
  if (n < 2) t.fail("count", "must be >= 2");
  return log_spaced(lo, hi, n);
}

inline MomentPlan read_moments(Section s) {
  MomentPlan p;
  p.qs = s.get<std::vector<double>>("q", p.qs);
  p.Ts = read_times(s, "T", p.Ts);
  const auto route = s.get<std::string>("route", "auto");
  try {
    p.route = parse_route_choice(route);
  } catch (const ValidationError& e) {
    s.fail("route", e.what());
  }
  p.guard_width = s.get<int>("guard_width", p.guard_width);
  p.guard_mass = s.get<double>("guard_mass", p.guard_mass);
  p.window_decades = s.get<double>("window_decades", p.window_decades);
  s.finish();
  try {
    p.validate();
  } catch (const ValidationError& e) {
    s.fail_here(e.what());
  }
  return p;
}

inline ThresholdPlan read_threshold(Section s) {
  ThresholdPlan p;
  p.s = s.get<double>("s", p.s);
  p.z = s.get<cplx>("z", p.z);
  p.chain_length = s.get<int>("chain_length", p.chain_length);
  p.distances = s.get<std::vector<int>>("distances", p.distances);
  p.realizations = s.get<int>("realizations", p.realizations);
  p.c_w = s.get<double>("c_w", p.c_w);
  s.finish();
  if (!(p.s > 0.0 && p.s < 1.0)) s.fail("s", "must lie in (0, 1)");
  if (!(p.z.imag() > 0.0)) s.fail("z", "needs Im z > 0");
  if (p.chain_length < 2) s.fail("chain_length", "must be >= 2");
  if (p.distances.size() < 2) s.fail("distances", "need at least two distances");
  for (int d : p.distances)
    if (d < 0 || d >= p.chain_length) s.fail("distances", "distance outside the chain");
  if (p.realizations < kMinFitRealizations) s.fail("realizations", "must be >= " + std::to_string(kMinFitRealizations));
  if (!(p.c_w > 0.0)) s.fail("c_w", "must be positive");
  return p;
}

inline GreensBlock read_greens(Section s) {
  GreensBlock g;
  g.zs = s.need<std::vector<cplx>>("z");
  g.targets = s.need<std::vector<Vertex>>("targets");
  g.origin = s.get<Vertex>("origin", g.origin);
  s.finish();
  if (g.zs.empty()) s.fail("z", "need at least one energy");
  for (const auto& z : g.zs)
    if (!(z.imag() > 0.0)) s.fail("z", "every z needs Im z > 0");
  if (g.targets.empty()) s.fail("targets", "need at least one target");
  return g;
}

inline DensityBlock read_density(Section s) {
  DensityBlock d;
  if (s.has("E_min")) d.e_min = s.need<double>("E_min");
  if (s.has("E_max")) d.e_max = s.need<double>("E_max");
  d.step = s.get<double>("E_step", d.step);
  d.eta = s.get<double>("eta", d.eta);
  d.length = s.get<int>("length", d.length);
  s.finish();
  if (d.e_min.has_value() != d.e_max.has_value()) s.fail(d.e_min ? "E_max" : "E_min", "E_min and E_max go together");
  if (d.e_min && !(*d.e_max > *d.e_min)) s.fail("E_max", "must exceed E_min");
  if (!(d.step > 0.0)) s.fail("E_step", "must be positive");
  if (!(d.eta > 0.0)) s.fail("eta", "must be positive");
  if (d.length < 1) s.fail("length", "must be >= 1");
  return d;
}

inline BooleBlock read_boole(Section s) {
  BooleBlock b;
  b.measure_file = s.get<std::string>("measure_file", "");
  b.atoms = s.get<int>("atoms", b.atoms);
  b.alpha = s.get<double>("alpha", b.alpha);
  b.beta = s.get<double>("beta", b.beta);
  b.ts = s.get<std::vector<double>>("t", b.ts);
  s.finish();
  if (b.atoms < 1) s.fail("atoms", "must be >= 1");
  if (!(b.alpha < b.beta)) s.fail("beta", "needs alpha < beta");
  for (double t : b.ts)
    if (!(t > 0.0)) s.fail("t", "every t must be positive");
  return b;
}

inline EstimatorsBlock read_estimators(Section s) {
  EstimatorsBlock e;
  e.s = s.get<double>("s", e.s);
  e.z = s.get<cplx>("z", e.z);
  e.targets = s.get<std::vector<Vertex>>("targets", {});
  e.max_distance = s.get<int>("max_distance", e.max_distance);
  e.correlator_distances = s.get<std::vector<int>>("correlator_distances", {});
  e.c_w = s.get<double>("c_w", e.c_w);
  if (s.has("threshold")) e.threshold = read_threshold(s.sub("threshold"));
  s.finish();
  if (!(e.s > 0.0 && e.s < 1.0)) s.fail("s", "must lie in (0, 1)");
  if (!(e.z.imag() > 0.0)) s.fail("z", "needs Im z > 0");
  if (e.max_distance < 2) s.fail("max_distance", "must be >= 2");
  if (!(e.c_w > 0.0)) s.fail("c_w", "must be positive");
  return e;
}

/// The raw model object with an "auto" gamma swapped for a placeholder.
inline json diag_model_json(Section& m, bool auto_gamma);

inline ContrastBlock read_contrast(Section s) {
  ContrastBlock c;
  auto& p = c.plan;
  {
    Section sym = s.sub("sym");
    p.sym = read_model(sym.sub("model"));
    if (sym.has("disorder")) p.sym_disorder = read_disorder(sym.sub("disorder"));
    sym.finish();
    if (p.sym.kind != ModelKind::Sym) sym.fail("model", "kind must be Sym");
  }
  {
    Section diag = s.sub("diag");
    if (!diag.has("model")) diag.fail("model", "missing required section");
    Section m = diag.sub("model");
    // gamma may be "auto": gamma_factor * gamma_0 from the 1D scan
    const bool auto_gamma = m.has("gamma") && m.raw("gamma").is_string();
    if (auto_gamma && m.raw("gamma").get<std::string>() != "auto") m.fail("gamma", "expected a number or \"auto\"");
    json copy = diag_model_json(m, auto_gamma);
    p.diag = read_model(Section(copy, {"contrast", "diag", "model"}, s.source()));
    if (auto_gamma) p.diag.gamma = 0.0;
    if (diag.has("disorder")) p.diag_disorder = read_disorder(diag.sub("disorder"));
    diag.finish();
    if (p.diag.kind != ModelKind::Diag) diag.fail("model", "kind must be Diag");
  }
  p.gamma_factor = s.get<double>("gamma_factor", p.gamma_factor);
  p.realizations = s.get<int>("realizations", p.realizations);
  if (s.has("threshold")) p.threshold = read_threshold(s.sub("threshold"));
  s.finish();
  if (!(p.gamma_factor > 0.0)) s.fail("gamma_factor", "must be positive");
  if (p.realizations < 1) s.fail("realizations", "must be >= 1");
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  Source src(text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("config line " + std::to_string(src.line_at(e.byte == 0 ? 0 : e.byte - 1)) + ": malformed JSON (" +
                          std::string(e.what()) + ")");
  }
  ExperimentConfig c;
  Section top(j, {}, &src);
  if (top.has("model")) c.model = read_model(top.sub("model"));
  if (top.has("disorder")) c.disorder = read_disorder(top.sub("disorder"));
  if (top.has("run")) {
    Section r = top.sub("run");
    c.run.realizations = r.get<int>("realizations", c.run.realizations);
    c.run.seed = r.get<std::uint64_t>("seed", c.run.seed);
    c.run.threads = r.get<int>("threads", c.run.threads);
    c.run.output_dir = r.get<std::string>("output_dir", c.run.output_dir);
    r.finish();
    if (c.run.realizations < 1) r.fail("realizations", "must be >= 1");
    if (c.run.threads < 0) r.fail("threads", "must be >= 0 (0 = all cores)");
  }
  if (top.has("moments")) c.moments = read_moments(top.sub("moments"));
  if (top.has("greens")) c.greens = read_greens(top.sub("greens"));
  if (top.has("density")) c.density = read_density(top.sub("density"));
  if (top.has("boole")) c.boole = read_boole(top.sub("boole"));
  if (top.has("estimators")) c.estimators = read_estimators(top.sub("estimators"));
  if (top.has("contrast")) c.contrast = read_contrast(top.sub("contrast"));
  top.finish();
  c.canonical = j.dump();
  c.hash = fnv1a64(c.canonical);
  return c;
}

inline json diag_model_json(Section& m, bool auto_gamma) {
  json out = json::object();
  for (const char* k : {"kind", "gamma", "ell", "cols", "rows"})
    if (m.has(k)) out[k] = m.raw(k);
  if (auto_gamma) out["gamma"] = 1.0;
  // anything else is unknown
  m.finish();
  return out;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// "# corrlab <version> config_hash=<hex> seed=<n>"
inline std::string header_line(const ExperimentConfig& c, std::uint64_t seed) {
  return std::string("# corrlab ") + kVersion + " config_hash=" + hex64(c.hash) + " seed=" + std::to_string(seed) + "\n";
}

}  // namespace corrlab::cli
