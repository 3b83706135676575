// corrlab: config-driven runner for the lattice, Green's function, density,
// moment, Boole and estimator experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"

#include "corrlab/boole.hpp"
#include "corrlab/estimators.hpp"
#include "corrlab/experiments.hpp"
#include "corrlab/greens.hpp"

extern "C" void openblas_set_num_threads(int);

namespace fs = std::filesystem;
using namespace corrlab;
using namespace corrlab::cli;

namespace {

struct Context {
  ExperimentConfig cfg;
  fs::path config_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out;

  [[nodiscard]] std::string header() const { return header_line(cfg, seed); }

  void write(const std::string& name, const std::string& body) const {
    fs::create_directories(out);
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + (out / name).string() + "'");
    f << header() << body;
    std::cout << (out / name).string() << "\n";
  }

  void write_json(const std::string& name, json j) const {
    j["_header"] = header().substr(0, header().size() - 1);
    write_raw(name, j.dump(2) + "\n");
  }

  void write_raw(const std::string& name, const std::string& body) const {
    fs::create_directories(out);
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + (out / name).string() + "'");
    f << body;
    std::cout << (out / name).string() << "\n";
  }
};

template <class T>
const T& need_block(const std::optional<T>& b, const char* name, const char* cmd) {
  if (!b) throw ValidationError(std::string("config: '") + cmd + "' needs a '" + name + "' section");
  return *b;
}

DisorderSpec seeded(const ExperimentConfig& c, std::uint64_t seed) {
  DisorderSpec d = c.disorder.value_or(DisorderSpec{});
  d.seed = seed;
  return d;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

json fit_json(const DecayFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"decay_rate", f.decay_rate()},
          {"realizations", f.realizations}};
}

std::string decay_csv(const DecayFit& f) {
  std::ostringstream os;
  write_decay_csv(os, f);
  return os.str();
}

std::string curves_csv(const std::vector<MomentCurve>& curves) {
  std::string out;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::ostringstream os;
    write_moment_csv(os, curves[i]);
    std::string s = os.str();
    if (i > 0) s = s.substr(s.find('\n') + 1);
    out += s;
  }
  return out;
}

json run_json(const MomentRun& r, const MomentPlan& plan) {
  json ex = json::array();
  for (std::size_t i = 0; i < r.curves.size(); ++i)
    ex.push_back({{"q", r.curves[i].q}, {"exponent", r.exponents[i]}});
  return {{"guard_cap", r.cap},     {"window", {r.window_lo, r.cap}}, {"guard_mass", plan.guard_mass},
          {"guard_width", plan.guard_width}, {"boundary_mass", r.boundary}, {"exponents", ex},
          {"route", r.curves.empty() ? "" : to_string(r.curves[0].route)}, {"realizations", r.curves.empty() ? 0 : r.curves[0].realizations}};
}

json graph_json(const GraphSpec& g) {
  return {{"kind", to_string(g.kind)}, {"gamma", g.gamma}, {"ell", g.ell}, {"cols", g.cols}, {"rows", g.rows}};
}

void cmd_build(const Context& ctx) {
  const auto& g = need_block(ctx.cfg.model, "model", "build");
  ctx.write("edges.txt", edge_list(build_lattice(g)));
  if (ctx.cfg.disorder) {
    std::ostringstream os;
    write_disorder_csv(os, sample_disorder(seeded(ctx.cfg, ctx.seed), g.cols));
    ctx.write("disorder.csv", os.str());
  }
}

void cmd_greens(const Context& ctx) {
  const auto& g = need_block(ctx.cfg.model, "model", "greens");
  const auto& gb = need_block(ctx.cfg.greens, "greens", "greens");
  auto lat = std::make_shared<const LatticeOperator>(build_lattice(g));
  const int origin = lat->index_of(gb.origin);
  std::vector<int> targets;
  for (const auto& v : gb.targets) targets.push_back(lat->index_of(v));
  const int R = ctx.cfg.run.realizations;
  const auto d = seeded(ctx.cfg, ctx.seed);
  std::vector<std::string> rows(static_cast<std::size_t>(R)), corner(static_cast<std::size_t>(R));
  const bool with_corner = g.kind == ModelKind::Sym && gb.origin == Vertex{0, 0};
  parallel_for(R, ctx.threads, [&](int r) {
    const auto sample = sample_disorder(d.with_realization(static_cast<std::uint64_t>(r)), g.cols);
    const Hamiltonian h(lat, sample);
    std::string& out = rows[static_cast<std::size_t>(r)];
    char buf[192];
    for (const auto z : gb.zs) {
      const auto col = resolvent_column(h, gb.origin, z);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const cplx v = col(targets[t]);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%d,%.17g,%.17g\n", r, z.real(), z.imag(), gb.targets[t].n1,
                      gb.targets[t].n2, v.real(), v.imag());
        out += buf;
      }
      if (with_corner) {
        const cplx f = sym_corner_formula(sample.omegas, g.gamma, z);
        const cplx s = col(origin);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r, z.real(), z.imag(), f.real(),
                      f.imag(), s.real(), s.imag(), std::abs(f - s) / std::abs(f));
        corner[static_cast<std::size_t>(r)] += buf;
      }
    }
  });
  std::string body = "realization,z_re,z_im,n1,n2,G_re,G_im\n";
  for (const auto& s : rows) body += s;
  ctx.write("greens.csv", body);
  if (with_corner) {
    std::string c = "realization,z_re,z_im,formula_re,formula_im,box_re,box_im,rel_diff\n";
    for (const auto& s : corner) c += s;
    ctx.write("corner.csv", c);
  }
}

void cmd_density(const Context& ctx) {
  const auto& g = need_block(ctx.cfg.model, "model", "density");
  const auto& db = need_block(ctx.cfg.density, "density", "density");
  if (g.kind != ModelKind::Sym) throw ValidationError("config: model.kind: the density is computed for Sym");
  const auto d = seeded(ctx.cfg, ctx.seed);
  const auto omegas = sample_disorder(d, db.length + 1).omegas;
  const auto grid = db.e_min ? energy_grid(*db.e_min, *db.e_max, db.step) : sym_spectrum_grid(d.omega_max, g.gamma, db.step);
  const auto sd = spectral_density(omegas, g.gamma, grid, db.eta, -1, ctx.threads);
  std::ostringstream os;
  write_density_csv(os, sd, d.omega_max);
  ctx.write("density.csv", os.str());
  const auto crit = critical_gamma(omegas, d.omega_max, db.eta);
  const double exact = boole::finite_volume_support(halfline_site1_measure(omegas), omegas[0], g.gamma);
  ctx.write_json("density_summary.json",
                 {{"mass", sd.mass()},
                  {"support_measure", sd.support_measure()},
                  {"four_gamma", 4.0 * g.gamma},
                  {"finite_volume_support", exact},
                  {"transient_mass", sd.mass_above(2.0 + d.omega_max)},
                  {"critical_gamma", crit.gamma},
                  {"sigma_edge", crit.sigma_edge},
                  {"critical_below_floor", crit.below_floor},
                  {"chain_length", db.length},
                  {"eta", db.eta}});
}

void cmd_moments(const Context& ctx) {
  const auto& g = need_block(ctx.cfg.model, "model", "moments");
  const auto& plan = need_block(ctx.cfg.moments, "moments", "moments");
  const auto run = run_moments(g, seeded(ctx.cfg, ctx.seed), plan, ctx.cfg.run.realizations, ctx.threads);
  ctx.write("moments.csv", curves_csv(run.curves));
  json j = run_json(run, plan);
  j["model"] = graph_json(g);
  ctx.write_json("moments_summary.json", j);
}

boole::PointMeasure boole_measure(const Context& ctx, const BooleBlock& b) {
  if (!b.measure_file.empty()) {
    fs::path p = b.measure_file;
    if (p.is_relative()) p = ctx.config_dir / p;
    std::ifstream in(p);
    if (!in) throw ValidationError("config: boole.measure_file: cannot open '" + p.string() + "'");
    return boole::read_measure_csv(in);
  }
  auto eng = realization_engine(ctx.seed, 0);
  std::vector<boole::Atom> atoms;
  for (int i = 0; i < b.atoms; ++i) {
    const double u = -3.0 + 6.0 * unit_uniform(eng);
    const double p = 0.1 + unit_uniform(eng);
    atoms.push_back({u, p});
  }
  return boole::PointMeasure(std::move(atoms));
}

void cmd_boole(const Context& ctx) {
  const auto& b = need_block(ctx.cfg.boole, "boole", "boole");
  const auto m = boole_measure(ctx, b);
  if (m.empty()) throw ValidationError("config: boole: measure has no atoms");
  std::ostringstream os;
  boole::write_measure_csv(os, m);
  ctx.write("measure.csv", os.str());
  const double ls = boole::level_set_measure(m, b.alpha, b.beta);
  const double c = m.total_mass();
  json tails = json::array();
  double worst = std::abs(ls - (b.beta - b.alpha));
  for (double t : b.ts) {
    const double tm = boole::tail_measure(m, t);
    tails.push_back({{"t", t}, {"measure", tm}, {"measure_times_t", tm * t}, {"error", std::abs(tm * t - c)}});
    worst = std::max(worst, std::abs(tm * t - c));
  }
  ctx.write_json("boole.json", {{"atoms", m.size()},
                                {"total_mass", c},
                                {"alpha", b.alpha},
                                {"beta", b.beta},
                                {"level_set", ls},
                                {"beta_minus_alpha", b.beta - b.alpha},
                                {"level_set_error", std::abs(ls - (b.beta - b.alpha))},
                                {"tails", tails},
                                {"max_error", worst}});
}

void cmd_estimate(const Context& ctx) {
  const auto& g = need_block(ctx.cfg.model, "model", "estimate");
  const auto& e = need_block(ctx.cfg.estimators, "estimators", "estimate");
  const auto d = seeded(ctx.cfg, ctx.seed);
  const int R = ctx.cfg.run.realizations;
  const auto lat = build_lattice(g);
  std::vector<Vertex> targets = e.targets;
  if (targets.empty()) {
    if (g.kind == ModelKind::Diag) {
      const auto spine = lat.spine();
      for (int k = 1; k <= e.max_distance && k < static_cast<int>(spine.size()); ++k)
        targets.push_back(spine[static_cast<std::size_t>(k)]);
    } else {
      for (int k = 1; k <= e.max_distance && k < g.cols; ++k) targets.push_back({k, 0});
    }
  }
  json j;
  j["model"] = graph_json(g);
  const auto fit = fractional_moment_scan(g, d, e.s, e.z, targets, R, ctx.threads);
  ctx.write("fractional.csv", decay_csv(fit));
  const double c_ap = apriori_constant(e.s, d.omega_max, d.rho_sup(), e.c_w);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fit.means.size(); ++i) worst = std::max(worst, (fit.means[i] - c_ap) / std::max(fit.stderr_[i], 1e-300));
  j["fractional"] = fit_json(fit);
  j["fractional"]["s"] = e.s;
  j["apriori_constant"] = c_ap;
  j["c_w"] = e.c_w;
  j["apriori_respected"] = worst <= 3.0;
  if (e.threshold) {
    DisorderSpec chain = d;
    chain.seed = mix64(ctx.seed ^ 0x5bd1e9955bd1e995ULL);
    auto tp = *e.threshold;
    tp.c_w = e.c_w;
    const auto rep = diag_threshold(chain, g.ell, tp, ctx.threads);
    ctx.write("chain.csv", decay_csv(rep.chain));
    j["threshold"] = {{"mu_hat", rep.mu_hat}, {"c_ap", rep.c_ap}, {"gamma0", rep.gamma0}, {"chain", fit_json(rep.chain)},
                      {"gamma_below_threshold", g.gamma < rep.gamma0}};
  }
  if (g.kind == ModelKind::Sym) {
    if (!e.correlator_distances.empty()) {
      const auto sc = sym_correlator_scan(g, d, e.correlator_distances, R, ctx.threads);
      ctx.write("correlator_horizontal.csv", decay_csv(sc.horizontal));
      ctx.write("correlator_vertical.csv", decay_csv(sc.vertical));
      j["correlator"] = {{"horizontal", fit_json(sc.horizontal)}, {"vertical", fit_json(sc.vertical)}};
    }
    const auto enc = spectrum_enclosure(g, d, R, 1e-8, ctx.threads);
    j["enclosure"] = {{"min_eig", enc.min_eig},
                      {"max_eig", enc.max_eig},
                      {"violations", enc.violations},
                      {"covering_gap", enc.covering_gap},
                      {"realizations", enc.realizations}};
  }
  ctx.write_json("estimate.json", j);
}

void cmd_contrast(const Context& ctx) {
  const auto& cb = need_block(ctx.cfg.contrast, "contrast", "contrast");
  ContrastPlan plan = cb.plan;
  if (ctx.cfg.moments) plan.moments = *ctx.cfg.moments;
  const auto rep = run_contrast(plan, ctx.seed, ctx.threads);
  ctx.write("contrast_sym.csv", curves_csv(rep.sym.curves));
  ctx.write("contrast_diag.csv", curves_csv(rep.diag.curves));
  GraphSpec diag = plan.diag;
  diag.gamma = rep.diag_gamma;
  json j;
  j["sym"] = run_json(rep.sym, plan.moments);
  j["sym"]["model"] = graph_json(plan.sym);
  j["sym"]["omega_max"] = plan.sym_disorder.omega_max;
  j["diag"] = run_json(rep.diag, plan.moments);
  j["diag"]["model"] = graph_json(diag);
  j["diag"]["omega_max"] = plan.diag_disorder.omega_max;
  if (rep.threshold)
    j["threshold"] = {{"mu_hat", rep.threshold->mu_hat},
                      {"c_ap", rep.threshold->c_ap},
                      {"gamma0", rep.threshold->gamma0},
                      {"gamma_factor", plan.gamma_factor},
                      {"chain", fit_json(rep.threshold->chain)}};
  ctx.write_json("contrast_summary.json", j);
  std::printf("sym exponent %s, diag exponent %s\n", fmt("%.4g", rep.sym.exponents[0]).c_str(),
              fmt("%.4g", rep.diag.exponents[0]).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  openblas_set_num_threads(1);
  CLI::App app{"corrlab: correlated-disorder lattice experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string output;

  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(const Context&);
  };
  const Cmd cmds[] = {
      {"build", "write the edge list (and disorder sample if configured)", cmd_build},
      {"greens", "resolvent entries G(target, origin; z)", cmd_greens},
      {"density", "spectral density of the Sym corner state", cmd_density},
      {"moments", "time-averaged position moments", cmd_moments},
      {"boole", "Boole level-set and tail identities for a point measure", cmd_boole},
      {"estimate", "fractional moments, correlators, enclosure", cmd_estimate},
      {"contrast", "paired Sym/Diag growth-exponent run", cmd_contrast},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    auto* s = app.add_subcommand(c.name, c.help);
    s->add_option("--config", config, "JSON config file")->required();
    s->add_option("--seed", seed, "override run.seed");
    s->add_option("--threads", threads, "override run.threads (0 = all cores)");
    s->add_option("--output", output, "override run.output_dir");
    subs.emplace_back(s, &c);
  }
  auto* val = app.add_subcommand("validate", "schema check only");
  val->add_option("--config", config, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    ctx.cfg = load_config(config);
    if (val->parsed()) return 0;  // empty report
    ctx.config_dir = fs::path(config).parent_path();
    ctx.seed = seed.value_or(ctx.cfg.run.seed);
    ctx.threads = threads.value_or(ctx.cfg.run.threads);
    if (ctx.threads < 0) throw ValidationError("--threads must be >= 0");
    ctx.out = output.empty() ? fs::path(ctx.cfg.run.output_dir) : fs::path(output);
    if (ctx.out.is_relative() && output.empty()) ctx.out = ctx.config_dir / ctx.out;
    for (const auto& [s, c] : subs)
      if (s->parsed()) c->fn(ctx);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
