#include "bwh/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

namespace bwh {

SystemKind system_kind_from_string(const std::string& s) {
  if (s == "torus_shift" || s == "torus") return SystemKind::torus_shift;
  if (s == "cyclic_shift" || s == "cyclic") return SystemKind::cyclic_shift;
  if (s == "bernoulli") return SystemKind::bernoulli;
  throw ConfigError("unknown dynamical system kind '" + s + "'");
}

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::torus_shift: return "torus_shift";
    case SystemKind::cyclic_shift: return "cyclic_shift";
    case SystemKind::bernoulli: return "bernoulli";
  }
  return "unknown";
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

long long pmod(long long a, long long p) {
  long long r = a % p;
  return r < 0 ? r + p : r;
}

}  // namespace

double hash_uniform(std::uint64_t seed, const std::vector<long long>& idx) {
  std::uint64_t h = splitmix(seed);
  for (long long v : idx) h = splitmix(h ^ static_cast<std::uint64_t>(v));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

DynamicalSystem make_dynamical_system(SystemKind kind, int dim, int p, const std::vector<double>& probs,
                                      std::uint64_t seed) {
  require(dim == 1 || dim == 2, "dynamical system dimension must be 1 or 2");
  DynamicalSystem s;
  s.kind = kind;
  s.dim = dim;
  s.seed = seed;
  if (kind == SystemKind::cyclic_shift) {
    require(p >= 1, "cyclic period p must be >= 1");
    s.p = p;
  }
  if (kind == SystemKind::bernoulli) {
    require(probs.size() >= 1, "bernoulli system needs state probabilities");
    double sum = 0.0;
    for (double q : probs) {
      require(q >= 0.0, "invalid probabilities: negative weight");
      sum += q;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "invalid probabilities: weights sum to " + std::to_string(sum));
    s.probs = probs;
  }
  return s;
}

Omega DynamicalSystem::sample(std::uint64_t i) const {
  Omega w;
  switch (kind) {
    case SystemKind::torus_shift:
      for (int a = 0; a < dim; ++a) w.x.push_back(hash_uniform(seed, {static_cast<long long>(i), a}));
      break;
    case SystemKind::cyclic_shift:
      for (int a = 0; a < dim; ++a)
        w.k.push_back(std::min<long long>(p - 1, static_cast<long long>(
                                                     hash_uniform(seed, {static_cast<long long>(i), a}) * p)));
      break;
    case SystemKind::bernoulli:
      w.seed = splitmix(seed ^ splitmix(i));
      w.k.assign(dim, 0);
      break;
  }
  return w;
}

Omega DynamicalSystem::act(const std::vector<long long>& shift, const Omega& w) const {
  require(static_cast<int>(shift.size()) == dim, "shift has the wrong dimension");
  Omega out = w;
  switch (kind) {
    case SystemKind::torus_shift: {
      std::vector<double> s(shift.begin(), shift.end());
      return act_real(s, w);
    }
    case SystemKind::cyclic_shift:
      for (int a = 0; a < dim; ++a) out.k[a] = pmod(w.k[a] + shift[a], p);
      break;
    case SystemKind::bernoulli:
      for (int a = 0; a < dim; ++a) out.k[a] = w.k[a] + shift[a];
      break;
  }
  return out;
}

Omega DynamicalSystem::act_real(const std::vector<double>& shift, const Omega& w) const {
  require(kind == SystemKind::torus_shift, "continuous action is defined for the torus shift only");
  Omega out = w;
  for (int a = 0; a < dim; ++a) {
    double v = w.x[a] + shift[a];
    v -= std::floor(v);
    out.x[a] = v >= 1.0 ? 0.0 : v;
  }
  return out;
}

int DynamicalSystem::symbol(const Omega& w, const std::vector<long long>& cell) const {
  switch (kind) {
    case SystemKind::torus_shift: return 0;
    case SystemKind::cyclic_shift: {
      long long s = 0;
      for (int a = 0; a < dim; ++a) s += pmod(w.k[a] + cell[a], p);
      return static_cast<int>(pmod(s, p));
    }
    case SystemKind::bernoulli: {
      std::vector<long long> j(dim);
      for (int a = 0; a < dim; ++a) j[a] = cell[a] + w.k[a];
      double u = hash_uniform(w.seed, j);
      double acc = 0.0;
      for (size_t s = 0; s < probs.size(); ++s) {
        acc += probs[s];
        if (u < acc) return static_cast<int>(s);
      }
      return static_cast<int>(probs.size()) - 1;
    }
  }
  return 0;
}

int DynamicalSystem::symbol_count() const {
  switch (kind) {
    case SystemKind::torus_shift: return 1;
    case SystemKind::cyclic_shift: return p;
    case SystemKind::bernoulli: return static_cast<int>(probs.size());
  }
  return 1;
}

double DynamicalSystem::symbol_weight(int s) const {
  switch (kind) {
    case SystemKind::torus_shift: return 1.0;
    case SystemKind::cyclic_shift: return 1.0 / p;
    case SystemKind::bernoulli: return probs[s];
  }
  return 0.0;
}

Profile profile_from_string(const std::string& s) {
  if (s == "poly") return Profile::poly;
  if (s == "sine") return Profile::sine;
  if (s == "wave") return Profile::wave;
  throw ConfigError("unknown bump profile '" + s + "'");
}

std::string to_string(Profile p) {
  switch (p) {
    case Profile::poly: return "poly";
    case Profile::sine: return "sine";
    case Profile::wave: return "wave";
  }
  return "unknown";
}

double profile_value(Profile p, double t) {
  switch (p) {
    case Profile::poly: {
      double u = t * (1.0 - t);
      return 64.0 * u * u * u;
    }
    case Profile::sine: {
      double s = std::sin(kPi * t);
      return s * s * s;
    }
    case Profile::wave: return std::sin(kTwoPi * t);
  }
  return 0.0;
}

double profile_derivative(Profile p, double t) {
  switch (p) {
    case Profile::poly: {
      double u = t * (1.0 - t);
      return 192.0 * u * u * (1.0 - 2.0 * t);
    }
    case Profile::sine: {
      double s = std::sin(kPi * t);
      return 3.0 * kPi * s * s * std::cos(kPi * t);
    }
    case Profile::wave: return kTwoPi * std::cos(kTwoPi * t);
  }
  return 0.0;
}

BumpDisplacement::BumpDisplacement(DynamicalSystem sys, BumpParams params, Omega omega)
    : sys_(std::move(sys)), params_(std::move(params)), omega_(std::move(omega)) {
  require(sys_.kind != SystemKind::torus_shift, "bump displacements need a cell-indexed system");
  require(static_cast<int>(params_.amplitudes.size()) >= sys_.symbol_count(),
          "bump amplitudes must cover every cell state");
  e_ = params_.direction.size() ? params_.direction : VecR::Ones(sys_.dim);
  require(e_.size() == sys_.dim, "bump direction has the wrong dimension");
  if (sys_.kind == SystemKind::cyclic_shift) require(static_cast<int>(omega_.k.size()) == sys_.dim, "omega mismatch");
  if (omega_.k.empty()) omega_.k.assign(sys_.dim, 0);
}

int BumpDisplacement::period() const { return sys_.kind == SystemKind::cyclic_shift ? sys_.p : 0; }

double BumpDisplacement::phi(const std::vector<double>& t, std::vector<double>* dphi) const {
  const int n = sys_.dim;
  const double scale = params_.profile == Profile::wave ? 1.0 / kTwoPi : 1.0;
  std::vector<double> h(n), dh(n);
  for (int a = 0; a < n; ++a) {
    h[a] = profile_value(params_.profile, t[a]);
    dh[a] = profile_derivative(params_.profile, t[a]);
  }
  double v = scale;
  for (int a = 0; a < n; ++a) v *= h[a];
  if (dphi) {
    dphi->assign(n, scale);
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a) (*dphi)[j] *= (a == j ? dh[a] : h[a]);
  }
  return v;
}

void BumpDisplacement::eval(const std::vector<double>& y, VecR& z, MatR& grad) const {
  const int n = sys_.dim;
  std::vector<long long> cell(n);
  std::vector<double> t(n);
  for (int a = 0; a < n; ++a) {
    double c = std::floor(y[a]);
    cell[a] = static_cast<long long>(c);
    t[a] = y[a] - c;
  }
  const double amp = params_.amplitudes[sys_.symbol(omega_, cell)];
  std::vector<double> dphi;
  const double v = phi(t, &dphi);
  z = amp * v * e_;
  grad.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) grad(i, j) = amp * e_(i) * dphi[j];
}

MatR BumpDisplacement::expected_grad(const std::vector<double>& y) const {
  const int n = sys_.dim;
  std::vector<double> t(n);
  for (int a = 0; a < n; ++a) t[a] = y[a] - std::floor(y[a]);
  double amp = 0.0;
  for (int s = 0; s < sys_.symbol_count(); ++s) amp += sys_.symbol_weight(s) * params_.amplitudes[s];
  std::vector<double> dphi;
  phi(t, &dphi);
  MatR g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = amp * e_(i) * dphi[j];
  return g;
}

BumpDisplacement deterministic_displacement(int dim, Profile profile, double amplitude) {
  DynamicalSystem sys = make_dynamical_system(SystemKind::cyclic_shift, dim, 1, {}, 0);
  BumpParams bp;
  bp.profile = profile;
  bp.amplitudes = {amplitude};
  Omega w;
  w.k.assign(dim, 0);
  return BumpDisplacement(sys, bp, w);
}

namespace {

// Visit the midpoint nodes of [0, cells)^n with q nodes per cell and axis.
template <class Fn>
void for_nodes(int n, long long per_axis, int q, Fn&& fn) {
  std::vector<double> y(n);
  long long total = 1;
  for (int a = 0; a < n; ++a) total *= per_axis;
  for (long long idx = 0; idx < total; ++idx) {
    long long r = idx;
    for (int a = n - 1; a >= 0; --a) {
      y[a] = (static_cast<double>(r % per_axis) + 0.5) / q;
      r /= per_axis;
    }
    fn(y);
  }
}

void sweep_bounds(const BumpDisplacement& z, double eta, int q, double& nu, double& lip) {
  const int n = z.dim();
  const int cells = z.period() > 0 ? z.period() : 8;
  nu = 1e300;
  lip = 0.0;
  VecR zv;
  MatR g;
  for_nodes(n, static_cast<long long>(cells) * q, q, [&](const std::vector<double>& y) {
    z.eval(y, zv, g);
    MatR F = MatR::Identity(n, n) + eta * g;
    nu = std::min(nu, F.determinant());
    lip = std::max(lip, F.norm());
  });
}

}  // namespace

DeformationSpec build_perturbed_identity(const BumpDisplacement& z, double eta,
                                         const PerturbedIdentityOptions& opt) {
  require(eta >= 0.0 && eta < 1.0, "eta must lie in [0, 1)");
  const int n = z.dim();
  int q = opt.grid_q;
  if (q <= 0) q = opt.medium ? default_cell_grid(opt.cutoff, *opt.medium) : fft_friendly(std::max(8 * opt.cutoff + 2, 32));
  DeformationSpec spec;
  spec.Z = std::make_shared<BumpDisplacement>(z);
  spec.eta = eta;
  SampleGrid g{n, q, 1.0};
  const int P = g.size();
  spec.stats.grid = g;
  spec.stats.n = n;
  spec.stats.EgradZ.assign(n * n, std::vector<double>(P));
  spec.stats.EdivZ.assign(P, 0.0);
  MatR mean = MatR::Zero(n, n);
  for (int p = 0; p < P; ++p) {
    MatR G = z.expected_grad(g.point(p));
    for (int c = 0; c < n * n; ++c) spec.stats.EgradZ[c][p] = G(c / n, c % n);
    spec.stats.EdivZ[p] = G.trace();
    mean += G / P;
  }
  FourierLattice flat = build_lattice(n, std::max(1, (q - 1) / 2));
  for (int c = 0; c < n * n; ++c) {
    std::vector<cxd> v(spec.stats.EgradZ[c].begin(), spec.stats.EgradZ[c].end());
    spec.EgradZ.push_back(PeriodicField::from_samples(flat, g, v));
  }
  spec.EdivZ = PeriodicField::from_samples(flat, g, std::vector<cxd>(spec.stats.EdivZ.begin(), spec.stats.EdivZ.end()));
  spec.c_phi = (MatR::Identity(n, n) + eta * mean).determinant();
  sweep_bounds(z, eta, std::min(q, 64), spec.nu, spec.lip);
  if (spec.nu < opt.nu_floor)
    throw ConfigError("eta too large: min det(grad Phi) = " + std::to_string(spec.nu) + " below nu = " +
                      std::to_string(opt.nu_floor));
  return spec;
}

DeformationReport validate_deformation(const DeformationSpec& spec, int samples, double nu_declared) {
  require(spec.Z != nullptr, "deformation spec has no displacement");
  const BumpDisplacement& z = *spec.Z;
  const int n = z.dim();
  DeformationReport r;
  r.nu_declared = nu_declared;
  sweep_bounds(z, spec.eta, 32, r.nu_observed, r.lip_observed);
  const DynamicalSystem& sys = z.system();
  VecR zv;
  MatR g1, g2;
  for (int i = 0; i < samples; ++i) {
    Omega w = sys.sample(static_cast<std::uint64_t>(i));
    if (sys.kind == SystemKind::cyclic_shift && w.k.empty()) w.k.assign(n, 0);
    std::vector<double> y(n), yk(n);
    std::vector<long long> k(n);
    for (int a = 0; a < n; ++a) {
      y[a] = hash_uniform(sys.seed + 17, {i, a, 0});
      k[a] = static_cast<long long>(hash_uniform(sys.seed + 17, {i, a, 1}) * 9.0) - 4;
      yk[a] = y[a] + static_cast<double>(k[a]);
    }
    z.at(w).eval(yk, zv, g1);
    z.at(sys.act(k, w)).eval(y, zv, g2);
    MatR F1 = MatR::Identity(n, n) + spec.eta * g1;
    MatR F2 = MatR::Identity(n, n) + spec.eta * g2;
    r.stationarity_residual = std::max(r.stationarity_residual, (F1 - F2).cwiseAbs().maxCoeff());
    r.nu_observed = std::min(r.nu_observed, F2.determinant());
    r.lip_observed = std::max(r.lip_observed, F2.norm());
  }
  r.nu_violated = r.nu_observed < nu_declared;
  return r;
}

std::vector<double> invert_deformation(const Displacement& z, double eta, const std::vector<double>& x) {
  const int n = z.dim();
  Eigen::Map<const VecR> xv(x.data(), n);
  VecR y = xv;
  VecR zv;
  MatR g;
  std::vector<double> yy(n);
  for (int it = 0; it < 100; ++it) {
    for (int a = 0; a < n; ++a) yy[a] = y(a);
    z.eval(yy, zv, g);
    VecR r = y + eta * zv - xv;
    if (r.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, xv.cwiseAbs().maxCoeff())) break;
    MatR F = MatR::Identity(n, n) + eta * g;
    y -= F.partialPivLu().solve(r);
  }
  for (int a = 0; a < n; ++a) yy[a] = y(a);
  return yy;
}

std::vector<BirkhoffEstimate> birkhoff_mean(const ScalarFn& f, int dim, const std::vector<double>& levels,
                                            int q) {
  require(q >= 1, "quadrature needs at least one node per cell");
  std::vector<BirkhoffEstimate> out;
  for (size_t i = 0; i < levels.size(); ++i) {
    const double t = levels[i];
    require(t > 0, "cube side must be positive");
    const long long per_axis = std::max(1LL, std::llround(t * q));
    double sum = 0.0;
    long long count = 0;
    for_nodes(dim, per_axis, q, [&](const std::vector<double>& y) {
      sum += f(y);
      ++count;
    });
    BirkhoffEstimate e;
    e.t = t;
    e.estimate = sum / static_cast<double>(count);
    e.richardson = e.estimate;
    if (i > 0 && std::abs(levels[i - 1] * 2.0 - t) < 1e-12 * t) e.richardson = 2.0 * e.estimate - out.back().estimate;
    out.push_back(e);
  }
  return out;
}

double cyclic_cell_average(const ScalarFn& f_at_w0, int dim, int p, int q) {
  // Sum over the p^dim states w of the cell integral of f(y, w) = f(y + w, w0).
  require(p >= 1, "cyclic period must be >= 1");
  double total = 0.0;
  long long states = 1;
  for (int a = 0; a < dim; ++a) states *= p;
  for (long long s = 0; s < states; ++s) {
    std::vector<double> shift(dim);
    long long r = s;
    for (int a = dim - 1; a >= 0; --a) {
      shift[a] = static_cast<double>(r % p);
      r /= p;
    }
    double cell = 0.0;
    long long cnt = 0;
    for_nodes(dim, q, q, [&](const std::vector<double>& y) {
      std::vector<double> ys(dim);
      for (int a = 0; a < dim; ++a) ys[a] = y[a] + shift[a];
      cell += f_at_w0(ys);
      ++cnt;
    });
    total += cell / static_cast<double>(cnt);
  }
  return total / static_cast<double>(states);
}

double deformed_mean_closed_form(const StationaryFn& f, const BumpDisplacement& z, double eta, int q,
                                 double nu_floor) {
  const int n = z.dim();
  const DynamicalSystem& sys = z.system();
  double num = 0.0;
  MatR mean_grad = MatR::Zero(n, n);
  VecR zv;
  MatR g;
  for (int s = 0; s < sys.symbol_count(); ++s) {
    const double w = sys.symbol_weight(s);
    if (w == 0.0) continue;
    BumpParams bp = z.params();
    const double amp = bp.amplitudes[s];
    BumpDisplacement unit = deterministic_displacement(n, bp.profile, amp);
    BumpParams up = unit.params();
    up.direction = bp.direction;
    unit = BumpDisplacement(unit.system(), up, unit.omega());
    double cell = 0.0;
    MatR cg = MatR::Zero(n, n);
    long long cnt = 0;
    double nu = 1e300;
    for_nodes(n, q, q, [&](const std::vector<double>& y) {
      unit.eval(y, zv, g);
      double J = (MatR::Identity(n, n) + eta * g).determinant();
      nu = std::min(nu, J);
      cell += f(y, s) * J;
      cg += g;
      ++cnt;
    });
    if (nu < nu_floor) throw ConfigError("nu violated: min det(grad Phi) = " + std::to_string(nu));
    num += w * cell / static_cast<double>(cnt);
    mean_grad += w * cg / static_cast<double>(cnt);
  }
  const double c_phi = (MatR::Identity(n, n) + eta * mean_grad).determinant();
  return num / c_phi;
}

void write_ergodic_csv(std::ostream& os, const std::vector<BirkhoffEstimate>& est, double closed_form) {
  os << "t,estimate,closed_form,abs_error\n";
  os.precision(17);
  for (const auto& e : est)
    os << e.t << "," << e.estimate << "," << closed_form << "," << std::abs(e.estimate - closed_form) << "\n";
}

}  // namespace bwh
