#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "bwh/effective.hpp"
#include "bwh/eigensolve.hpp"
#include "bwh/evolution.hpp"
#include "bwh/perturbation.hpp"
#include "bwh/report.hpp"
#include "bwh/stochastic.hpp"

namespace fs = std::filesystem;

namespace bwh {

namespace {

struct Context {
  json cfg;  // resolved: referenced files inlined, flags applied
  fs::path out;
  RunStamp stamp;
  int threads = 1;
};

json resolve_ref(const json& v, const fs::path& base, const std::string& what) {
  if (v.is_string()) {
    fs::path p = v.get<std::string>();
    if (p.is_relative()) p = base / p;
    require(fs::exists(p), what + " file not found: " + p.string());
    return read_json(p);
  }
  require(v.is_object(), what + " must be a path or an object");
  return v;
}

CellMedium medium_of(const Context& c) {
  require(c.cfg.contains("medium"), "config needs a medium");
  return medium_from_json(c.cfg.at("medium"));
}

DeformationConfig load_deformation(const Context& c, int dim) {
  require(c.cfg.contains("deformation"), "config needs a deformation");
  return deformation_from_json(c.cfg.at("deformation"), dim, c.stamp.seed);
}

std::vector<double> doubles(const Context& c, const std::string& key, std::vector<double> def) {
  return c.cfg.contains(key) ? c.cfg.at(key).get<std::vector<double>>() : def;
}

VecR theta_init(const Context& c, int dim) {
  if (!c.cfg.contains("theta")) return VecR::Zero(dim);
  VecR t = vec_from_json(c.cfg.at("theta"));
  require(t.size() == dim, "theta has the wrong dimension");
  return t;
}

void emit_csv(const Context& c, const std::string& name, const std::string& csv) {
  write_text(c.out / name, stamp_csv(csv, c.stamp));
}

void emit_json(const Context& c, const std::string& name, const json& j) {
  write_text(c.out / name, stamp_json(j, c.stamp).dump(2) + "\n");
}

// Runs f(0..n-1) on at most `threads` workers; results land in index order.
void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errs(n);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

struct PeriodicSetup {
  CellMedium medium;
  FourierLattice lat;
  CellForm form;
  CriticalResult crit;
};

PeriodicSetup periodic_setup(const Context& c) {
  PeriodicSetup s;
  s.medium = medium_of(c);
  s.lat = build_lattice(s.medium.dim, c.cfg.value("cutoff", 16));
  s.form = form_from_medium(s.medium, s.lat);
  const int band = c.cfg.value("band", 0);
  const VecR t0 = theta_init(c, s.medium.dim);
  if (c.cfg.value("find_critical", true)) {
    s.crit = find_critical(s.form, band, t0);
  } else {
    s.crit.point = band_point(s.form, t0, band);
  }
  return s;
}

struct SeriesSetup {
  PeriodicSetup base;
  DeformationConfig def;
  DeformationSpec spec;
  PerturbationSeries series;
};

SeriesSetup build_series(const Context& c, double eta) {
  PeriodicSetup base = periodic_setup(c);
  DeformationConfig def = load_deformation(c, base.medium.dim);
  PerturbedIdentityOptions po;
  po.cutoff = base.lat.cutoff;
  po.medium = &base.medium;
  DeformationSpec spec = build_perturbed_identity(def.z, eta, po);
  const BandPoint& p = base.crit.point;
  AuxiliaryFields aux = first_auxiliary(base.form, p);
  cxd alpha = 0.0;
  if (c.cfg.contains("gauge_alpha")) {
    auto g = c.cfg.at("gauge_alpha").get<std::vector<double>>();
    require(g.size() == 2, "gauge_alpha must be [re, im]");
    alpha = cxd(g[0], g[1]);
  }
  CorrectorFields corr = first_order_correctors(base.medium, base.lat, p, aux, spec.stats, alpha);
  PerturbationSeries series = quasi_perfect_series(base.medium, base.lat, p, aux, corr, spec.stats);
  return {std::move(base), std::move(def), std::move(spec), std::move(series)};
}

json series_json(const PerturbationSeries& s) {
  return {{"theta1", to_json(s.theta1)}, {"lambda1", s.lambda1}, {"A0", to_json(s.A0)}, {"A1", to_json(s.A1)},
          {"U0", s.U0},  {"U1", s.U1},   {"B0", to_json(s.B0)},       {"B1", to_json(s.B1)},
          {"c0", s.c0},  {"c1", s.c1}};
}

json cmd_bands(const Context& c) {
  CellMedium m = medium_of(c);
  FourierLattice lat = build_lattice(m.dim, c.cfg.value("cutoff", 16));
  std::vector<int> bands = c.cfg.value("bands", std::vector<int>{0, 1, 2});
  json g = c.cfg.value("grid", json::object());
  GridSpec grid = GridSpec::uniform(m.dim, g.value("lo", -0.5), g.value("hi", 0.5), g.value("nodes", 21));
  BandSurface s = band_surface([&](const VecR& t) { return assemble_periodic(m, t, lat); }, bands, grid);
  std::ostringstream os;
  write_band_csv(os, s);
  emit_csv(c, "bands.csv", os.str());
  return {{"artifact", "bands.csv"}, {"nodes", grid.size()}, {"crossings", s.crossings.size()},
          {"lipschitz", s.lipschitz}};
}

json cmd_critical(const Context& c) {
  PeriodicSetup s = periodic_setup(c);
  json j = {{"theta_star", to_json(s.crit.point.theta)}, {"lambda_star", s.crit.point.lambda},
            {"band", s.crit.point.band},                  {"iterations", s.crit.iterations},
            {"grad_norm", s.crit.grad_norm},              {"fallbacks", s.crit.fallbacks}};
  emit_json(c, "critical.json", j);
  return {{"artifact", "critical.json"}, {"lambda_star", s.crit.point.lambda}};
}

json cmd_effective(const Context& c) {
  PeriodicSetup s = periodic_setup(c);
  EffectiveOptions eo;
  eo.fd_step = c.cfg.value("fd_step", eo.fd_step);
  eo.route_tol = c.cfg.value("route_tol", eo.route_tol);
  const BandPoint& p = s.crit.point;
  EffectiveCoefficients e = effective_coefficients(s.form, p, first_auxiliary(s.form, p), eo);
  json j = {{"theta_star", to_json(e.theta_star)},
            {"band", e.band},
            {"lambda_star", e.lambda_star},
            {"A_star", to_json(e.A_star)},
            {"U_star", e.U_star},
            {"B", to_json(e.B)},
            {"c_psi", e.c_psi},
            {"route", route_name(e.route)},
            {"routes",
             {{route_name(Route::bilinear), to_json(e.A_star)},
              {route_name(Route::hessian_fd), to_json(e.A_fd)},
              {route_name(Route::sac), to_json(e.A_sac)}}},
            {"route_discrepancy", e.route_discrepancy},
            {"grad_norm", e.grad_norm}};
  emit_json(c, "effective.json", j);
  return {{"artifact", "effective.json"}, {"route_discrepancy", e.route_discrepancy}};
}

json cmd_perturb(const Context& c) {
  const double eta = c.cfg.value("eta", 0.01);
  SeriesSetup s = build_series(c, eta);
  json j = series_json(s.series);
  j["theta_star"] = to_json(s.base.crit.point.theta);
  j["lambda_star"] = s.base.crit.point.lambda;
  j["theta_system"] = to_json(s.series.correctors.theta_system);
  j["solvability"] = s.series.correctors.solvability;
  emit_json(c, "perturb.json", j);
  return {{"artifact", "perturb.json"}, {"lambda1", s.series.lambda1}};
}

json cmd_oracle(const Context& c) {
  const std::vector<double> etas = doubles(c, "etas", {0.04, 0.02, 0.01});
  SeriesSetup s = build_series(c, *std::max_element(etas.begin(), etas.end()));
  OracleOptions oo;
  oo.cutoff = s.base.lat.cutoff;
  OracleTable t = supercell_oracle(s.base.medium, s.def.z, etas, s.base.crit.point.band, s.base.crit.point.theta,
                                   s.series, oo);
  std::ostringstream os;
  write_oracle_csv(os, t);
  emit_csv(c, "oracle.csv", os.str());
  json j = {{"slope", t.slope_A},
            {"slope_lambda", t.slope_lambda},
            {"slope_A", t.slope_A},
            {"pair_slopes_lambda", t.pair_slopes_lambda},
            {"pair_slopes_A", t.pair_slopes_A},
            {"band_super", t.band_super},
            {"period", t.period},
            {"series", series_json(s.series)}};
  emit_json(c, "oracle.json", j);
  return {{"artifact", "oracle.csv"}, {"slope", t.slope_A}, {"slope_lambda", t.slope_lambda}};
}

json cmd_evolve(const Context& c) {
  CellMedium m = medium_of(c);
  require(m.dim == 1, "evolve supports dim = 1");
  const std::vector<double> eps = doubles(c, "eps", {1.0 / 8, 1.0 / 16, 1.0 / 32});
  EvolutionConfig base;
  base.T = c.cfg.value("T", base.T);
  base.L = c.cfg.value("L", base.L);
  base.dt = c.cfg.value("dt", base.dt);
  base.dt_cap = c.cfg.value("dt_cap", base.dt_cap);
  base.cell_points = c.cfg.value("cell_points", base.cell_points);
  base.samples = c.cfg.value("samples", base.samples);
  const double sigma = c.cfg.value("sigma", 1.0);
  const double center = c.cfg.value("center", base.L / 2);
  const int band = c.cfg.value("band", 0);
  const double theta = c.cfg.value("theta_star", 0.0);
  std::optional<DeformationConfig> def;
  if (c.cfg.contains("deformation")) def = load_deformation(c, 1);
  Envelope v0 = gaussian_envelope({center}, sigma);
  std::vector<CorrectorRun> runs(eps.size());
  parallel_for(static_cast<int>(eps.size()), c.threads, [&](int i) {
    EvolutionConfig cfg = base;
    cfg.eps = eps[i];
    runs[i] = corrector_study(m, cfg, v0, band, theta, def ? &def->z : nullptr, def ? def->eta : 0.0);
  });
  std::ostringstream os;
  os.precision(17);
  os << "eps,error,mass_drift,grad_constant,dt,steps\n";
  json ratios = json::array();
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    os << r.eps << "," << r.error << "," << r.mass_drift << "," << r.grad_constant << "," << r.dt << "," << r.steps
       << "\n";
    if (i > 0) ratios.push_back(runs[i - 1].error / r.error);
  }
  emit_csv(c, "corrector.csv", os.str());
  const DiscreteCell& cell = runs.front().cell;
  json j = {{"A_star", cell.A_star}, {"U_star", cell.U_star}, {"lambda_star", cell.lambda},
            {"ratios", ratios},      {"T", base.T},             {"L", base.L}};
  emit_json(c, "evolve.json", j);
  return {{"artifact", "corrector.csv"}, {"ratios", ratios}};
}

json cmd_split(const Context& c) {
  const std::vector<double> etas = doubles(c, "etas", {0.08, 0.04, 0.02});
  SeriesSetup s = build_series(c, *std::max_element(etas.begin(), etas.end()));
  OracleOptions oo;
  oo.cutoff = s.base.lat.cutoff;
  OracleTable t = supercell_oracle(s.base.medium, s.def.z, etas, s.base.crit.point.band, s.base.crit.point.theta,
                                   s.series, oo);
  SplittingInput in;
  in.A_per = s.series.A0;
  in.A1 = s.series.A1;
  in.U_per = s.series.U0;
  in.U1 = s.series.U1;
  in.etas = etas;
  for (const auto& r : t.rows) {
    in.A_eta.push_back(r.A_star);
    in.U_eta.push_back(r.U_star);
  }
  const int n = s.base.medium.adim;
  SampleGrid box{n, c.cfg.value("box_points", 256), c.cfg.value("box", 16.0)};
  const double T = c.cfg.value("T", 0.5);
  Envelope v0 = gaussian_envelope(std::vector<double>(n, 0.0), c.cfg.value("sigma", 1.0));
  SplittingResult r = splitting_series(in, v0, box, T);
  std::ostringstream os;
  os.precision(17);
  os << "eta,residual\n";
  for (size_t i = 0; i < r.etas.size(); ++i) os << r.etas[i] << "," << r.residuals[i] << "\n";
  emit_csv(c, "splitting.csv", os.str());
  json j = {{"slope", r.slope},
            {"duhamel_discrepancy", r.duhamel_discrepancy},
            {"w_norm", r.w_norm},
            {"series", series_json(s.series)}};
  emit_json(c, "split.json", j);
  return {{"artifact", "splitting.csv"}, {"slope", r.slope}};
}

json cmd_ergodic(const Context& c) {
  const int dim = c.cfg.value("dim", 1);
  DeformationConfig def = load_deformation(c, dim);
  const std::vector<double> offs = doubles(c, "state_offsets", {0.0, 1.0});
  require(static_cast<int>(offs.size()) >= def.z.system().symbol_count(), "state_offsets must cover every state");
  StationaryFn f = [&](const std::vector<double>& y, int s) { return offs[s] + std::cos(kTwoPi * y[0]); };
  const BumpDisplacement& z = def.z;
  const double eta = def.eta;
  ScalarFn g = [&](const std::vector<double>& x) {
    const std::vector<double> y = invert_deformation(z, eta, x);
    std::vector<long long> cell(y.size());
    for (size_t a = 0; a < y.size(); ++a) cell[a] = static_cast<long long>(std::floor(y[a]));
    return f(y, z.system().symbol(z.omega(), cell));
  };
  std::vector<double> levels = doubles(c, "levels", {});
  if (levels.empty())
    for (int e = 4; e <= 10; ++e) levels.push_back(std::ldexp(1.0, e));
  const int q = c.cfg.value("q", 16);
  auto est = birkhoff_mean(g, dim, levels, q);
  const double closed = deformed_mean_closed_form(f, z, eta);
  std::ostringstream os;
  write_ergodic_csv(os, est, closed);
  emit_csv(c, "ergodic.csv", os.str());
  return {{"artifact", "ergodic.csv"}, {"closed_form", closed}, {"final_error", std::abs(est.back().estimate - closed)}};
}

json cmd_perturb_matrix(const Context& c) {
  const json& mj = c.cfg.at("matrix");
  MatrixSeries s;
  s.nvars = mj.value("nvars", 1);
  for (const auto& t : mj.at("coefficients")) s.add(t.at("alpha").get<MultiIndex>(), cmat_from_json(t.at("A")));
  if (mj.contains("tail_c")) s.tail_c = mj.at("tail_c").get<double>();
  s.validate();
  std::vector<VecR> samples;
  for (const auto& z : c.cfg.at("samples")) samples.push_back(vec_from_json(z));
  const double lambda0 = c.cfg.value("lambda0", 0.0);
  BranchResult r = track_branches(s, lambda0, c.cfg.value("multiplicity", 1), samples);
  if (c.cfg.contains("d") && c.cfg.contains("d_prime"))
    isolation_check(s, r, c.cfg.at("d").get<double>(), c.cfg.at("d_prime").get<double>());
  std::ostringstream os;
  write_branch_csv(os, r);
  emit_csv(c, "branches.csv", os.str());
  double res = 0.0;
  for (const auto& x : r.samples) res = std::max(res, x.residual);
  json j = {{"lambda0", r.lambda0}, {"multiplicity", r.multiplicity},
            {"radius", std::isinf(r.radius) ? json("inf") : json(r.radius)},
            {"window", std::isinf(r.window) ? json("inf") : json(r.window)},
            {"lipschitz", r.lipschitz}, {"max_residual", res}, {"isolation", r.isolation}};
  emit_json(c, "branches.json", j);
  return {{"artifact", "branches.csv"}, {"max_residual", res}};
}

const std::vector<std::pair<std::string, std::function<json(const Context&)>>>& commands() {
  static const std::vector<std::pair<std::string, std::function<json(const Context&)>>> cmds = {
      {"bands", cmd_bands},     {"critical", cmd_critical}, {"effective", cmd_effective},
      {"perturb", cmd_perturb}, {"oracle", cmd_oracle},     {"evolve", cmd_evolve},
      {"split", cmd_split},     {"ergodic", cmd_ergodic},   {"perturb-matrix", cmd_perturb_matrix}};
  return cmds;
}

void error_line(std::ostream& err, const std::string& kind, const std::string& msg, int code) {
  err << json{{"status", "error"}, {"kind", kind}, {"message", msg}, {"exit_code", code}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bloch wave homogenization studies"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outdir;
  std::optional<int> threads;
  std::string chosen;
  for (const auto& [name, fn] : commands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " study");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "seed recorded in every output");
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--threads", threads, "worker cap for parallel sweeps")->check(CLI::PositiveNumber);
    sub->callback([&chosen, name = name] { chosen = name; });
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "config_error", e.what(), 2);
    return 2;
  }
  try {
    Context c;
    fs::path base = ".";
    if (!config_path.empty()) {
      require(fs::exists(config_path), "config file not found: " + config_path);
      c.cfg = read_json(config_path);
      require(c.cfg.is_object(), "config must be a JSON object");
      base = fs::path(config_path).parent_path();
    } else {
      c.cfg = json::object();
    }
    if (c.cfg.contains("medium")) c.cfg["medium"] = resolve_ref(c.cfg["medium"], base, "medium");
    if (c.cfg.contains("deformation")) c.cfg["deformation"] = resolve_ref(c.cfg["deformation"], base, "deformation");
    if (seed) c.cfg["seed"] = *seed;
    if (threads) c.cfg["threads"] = *threads;
    if (outdir) c.cfg["out"] = *outdir;
    c.cfg["subcommand"] = chosen;
    c.stamp.seed = c.cfg.value("seed", std::uint64_t{0});
    c.threads = c.cfg.value("threads", 1);
    c.out = c.cfg.value("out", std::string("out"));
    json hashed = c.cfg;
    hashed.erase("out");
    hashed.erase("threads");
    c.stamp.config_hash = config_hash(hashed);
    emit_json(c, "config.json", c.cfg);
    for (const auto& [name, fn] : commands()) {
      if (name != chosen) continue;
      json summary = fn(c);
      out << stamp_json({{"status", "ok"}, {"subcommand", chosen}, {"summary", summary}}, c.stamp).dump() << "\n";
      return 0;
    }
    throw ConfigError("unknown subcommand");
  } catch (const ConfigError& e) {
    error_line(err, "config_error", e.what(), 2);
    return 2;
  } catch (const json::exception& e) {
    error_line(err, "config_error", e.what(), 2);
    return 2;
  } catch (const NumericalError& e) {
    error_line(err, "numerical_error", e.what(), 3);
    return 3;
  } catch (const std::exception& e) {
    error_line(err, "numerical_error", e.what(), 3);
    return 3;
  }
}

}  // namespace bwh
