#include "bwh/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include "json.hpp"

#include "bwh/effective.hpp"
#include "bwh/stochastic.hpp"

namespace bwh {

Envelope gaussian_envelope(const std::vector<double>& center, double sigma, const std::vector<double>& k) {
  require(sigma > 0, "gaussian width must be positive");
  return [center, sigma, k](const std::vector<double>& x) {
    double r2 = 0.0, ph = 0.0;
    for (size_t a = 0; a < center.size(); ++a) {
      double d = x[a] - center[a];
      r2 += d * d;
      if (a < k.size()) ph += k[a] * x[a];
    }
    return std::exp(-r2 / (2 * sigma * sigma)) * std::exp(kI * (kTwoPi * ph));
  };
}

MatC discrete_bloch(const DiscreteCell& c, double theta, int order) {
  const int S = c.size();
  const double hc = 1.0 / c.nc;
  const double inv = 1.0 / (hc * hc);
  const cxd ph = std::exp(kI * (kTwoPi * theta * hc));
  const cxd dfac = std::pow(kI * (kTwoPi * hc), order);
  MatC H = MatC::Zero(S, S);
  for (int i = 0; i < S; ++i) {
    const int ip = (i + 1) % S;
    const int im = (i - 1 + S) % S;
    if (order == 0) H(i, i) += (c.A_half[i] + c.A_half[im]) * inv + c.V[i];
    cxd off = -c.A_half[i] * inv * ph * dfac;
    H(i, ip) += off;
    H(ip, i) += std::conj(off);
  }
  return H;
}

DiscreteCell discrete_cell(const CellMedium& medium, int nc, double theta, int band, const Displacement* z,
                           double eta) {
  require(medium.dim == 1 && medium.adim == 1, "finite-difference evolution supports dim = 1");
  require(nc >= 16, "grid under-resolved: need at least 16 points per cell");
  DiscreteCell c;
  c.nc = nc;
  c.period = z ? z->period() : 1;
  require(c.period >= 1, "evolution needs a periodic (cyclic) deformation realization");
  c.theta = theta;
  c.band = band;
  const int S = c.size();
  c.A_half.resize(S);
  c.V.resize(S);
  c.U.resize(S);
  auto pull = [&](double y) {
    if (!z || eta == 0.0) return y;
    return invert_deformation(*z, eta, {y})[0];
  };
  for (int i = 0; i < S; ++i) {
    const double yn = pull(static_cast<double>(i) / nc);
    const double yh = pull((i + 0.5) / nc);
    c.A_half[i] = medium.A[0].eval({yh}).real();
    c.V[i] = medium.V.eval({yn}).real();
    c.U[i] = medium.U.eval({yn}).real();
    require(c.A_half[i] > 0, "coercivity violated at a finite-difference node");
  }
  require(band >= 0 && band < S, "band index exceeds the finite-difference cell size");
  Eigen::SelfAdjointEigenSolver<MatC> es(discrete_bloch(c, theta, 0));
  ensure(es.info() == Eigen::Success, "finite-difference cell eigensolver failed");
  const VecR ev = es.eigenvalues();
  c.lambda = ev(band);
  VecC psi = es.eigenvectors().col(band);
  const MatC H1 = discrete_bloch(c, theta, 1);
  const MatC H2 = discrete_bloch(c, theta, 2);
  double d2 = psi.dot(H2 * psi).real();
  for (int k = 0; k < S; ++k) {
    if (k == band) continue;
    const double gap = c.lambda - ev(k);
    ensure(std::abs(gap) > 1e-10, "finite-difference band is not simple");
    d2 += 2.0 * std::norm(es.eigenvectors().col(k).dot(H1 * psi)) / gap;
  }
  c.A_star = d2 / (2.0 * kFourPi2);
  double uw = 0.0;
  for (int i = 0; i < S; ++i) uw += c.U[i] * std::norm(psi(i));
  c.U_star = uw / psi.squaredNorm();
  psi *= std::sqrt(static_cast<double>(S)) / psi.norm();
  const cxd s = psi.sum();
  if (std::abs(s) > 1e-8 * S) {
    psi *= std::conj(s) / std::abs(s);
  } else {
    Eigen::Index imax = 0;
    psi.cwiseAbs().maxCoeff(&imax);
    psi *= std::conj(psi(imax)) / std::abs(psi(imax));
  }
  c.psi = psi;
  return c;
}

double choose_dt(const EvolutionConfig& cfg, const DiscreteCell& cell) {
  if (cfg.dt > 0) return cfg.dt;
  double vmax = 0.0;
  for (double v : cell.V) vmax = std::max(vmax, std::abs(v));
  double dt = cfg.dt_cap;
  if (vmax > 0) dt = std::min(dt, 0.1 * cfg.eps * cfg.eps * kTwoPi / vmax);
  return dt;
}

namespace {

int box_points(const EvolutionConfig& cfg, const DiscreteCell& cell) {
  require(cfg.eps > 0 && cfg.L > 0, "eps and box length must be positive");
  require(cell.nc >= 16, "grid under-resolved: need at least 16 points per cell");
  const double h = cfg.eps / cell.nc;
  const double m = cfg.L / h;
  const long long M = std::llround(m);
  require(std::abs(m - M) < 1e-8 * m && M % cell.size() == 0,
          "box must hold an integer number of eps-periods");
  return static_cast<int>(M);
}

// Cyclic tridiagonal solver (Sherman-Morrison) for a fixed complex matrix with
// sub-diagonal a, diagonal b, super-diagonal c; a[0] and c[M-1] are the corners.
class CyclicTridiag {
 public:
  CyclicTridiag(std::vector<cxd> a, std::vector<cxd> b, std::vector<cxd> c) : n_(static_cast<int>(b.size())) {
    alpha_ = c[n_ - 1];  // bottom-left corner A(n-1, 0)
    beta_ = a[0];        // top-right corner A(0, n-1)
    gamma_ = -b[0];
    b[0] -= gamma_;
    b[n_ - 1] -= alpha_ * beta_ / gamma_;
    a_ = std::move(a);
    c_ = std::move(c);
    // Thomas factors.
    cp_.resize(n_);
    den_.resize(n_);
    den_[0] = b[0];
    cp_[0] = c_[0] / den_[0];
    for (int i = 1; i < n_; ++i) {
      den_[i] = b[i] - a_[i] * cp_[i - 1];
      ensure(std::abs(den_[i]) > 1e-300, "singular Crank-Nicolson system");
      cp_[i] = c_[i] / den_[i];
    }
    std::vector<cxd> u(n_, 0.0);
    u[0] = gamma_;
    u[n_ - 1] = alpha_;
    z_ = thomas(u);
    fac_ = 1.0 + z_[0] + beta_ * z_[n_ - 1] / gamma_;
  }
  std::vector<cxd> solve(const std::vector<cxd>& r) const {
    std::vector<cxd> x = thomas(r);
    const cxd f = (x[0] + beta_ * x[n_ - 1] / gamma_) / fac_;
    for (int i = 0; i < n_; ++i) x[i] -= f * z_[i];
    return x;
  }

 private:
  std::vector<cxd> thomas(const std::vector<cxd>& r) const {
    std::vector<cxd> d(n_);
    d[0] = r[0] / den_[0];
    for (int i = 1; i < n_; ++i) d[i] = (r[i] - a_[i] * d[i - 1]) / den_[i];
    for (int i = n_ - 2; i >= 0; --i) d[i] -= cp_[i] * d[i + 1];
    return d;
  }
  int n_;
  cxd alpha_, beta_, gamma_, fac_;
  std::vector<cxd> a_, c_, cp_, den_, z_;
};

double grad_energy(const WavefieldState& s) {
  const double h = s.h();
  double e = 0.0;
  for (int j = 0; j < s.M; ++j) e += std::norm(s.eps * (s.u[(j + 1) % s.M] - s.u[j]) / h);
  return e * h;
}

}  // namespace

double mass(const WavefieldState& s) {
  double m = 0.0;
  for (const auto& v : s.u) m += std::norm(v);
  return m * s.h();
}

WavefieldState well_prepared_initial(const EvolutionConfig& cfg, const DiscreteCell& cell, const Envelope& v0) {
  WavefieldState s;
  s.dim = 1;
  s.L = cfg.L;
  s.M = box_points(cfg, cell);
  s.eps = cfg.eps;
  s.t = 0.0;
  s.u.resize(s.M);
  const int S = cell.size();
  for (int j = 0; j < s.M; ++j) {
    const double x = s.x(j);
    s.u[j] = std::exp(kI * (kTwoPi * cell.theta * x / cfg.eps)) * cell.psi(j % S) * v0({x});
  }
  return s;
}

EvolutionReport evolve_eps(const WavefieldState& init, const DiscreteCell& cell, const EvolutionConfig& cfg) {
  require(init.dim == 1, "finite-difference evolution supports dim = 1");
  require(cfg.samples >= 1 && cfg.T > 0, "need T > 0 and at least one sample");
  const int M = init.M;
  const int S = cell.size();
  require(M % S == 0 && static_cast<int>(init.u.size()) == M, "state inconsistent with the cell grid");
  const double eps2 = cfg.eps * cfg.eps;
  const double hc = 1.0 / cell.nc;
  const double inv = 1.0 / (eps2 * hc * hc);
  EvolutionReport rep;
  const double dt0 = choose_dt(cfg, cell);
  const int per_sample = std::max(1, static_cast<int>(std::ceil(cfg.T / (dt0 * cfg.samples) - 1e-9)));
  rep.steps = per_sample * cfg.samples;
  rep.dt = cfg.T / rep.steps;
  const double dt = rep.dt;
  // K = eps^-2 (H_y - lambda) + U, real symmetric cyclic tridiagonal.
  std::vector<double> diag(M), off(M);
  for (int j = 0; j < M; ++j) {
    const int c = j % S;
    const int cm = (j - 1 + M) % M % S;
    diag[j] = (cell.A_half[c] + cell.A_half[cm]) * inv + (cell.V[c] - cell.lambda) / eps2 + cell.U[c];
    off[j] = -cell.A_half[c] * inv;  // couples j and j+1
  }
  const cxd hdt = 0.5 * dt * kI;
  std::vector<cxd> a(M), b(M), c(M);
  for (int j = 0; j < M; ++j) {
    b[j] = 1.0 - hdt * diag[j];
    c[j] = -hdt * off[j];
    a[j] = -hdt * off[(j - 1 + M) % M];
  }
  CyclicTridiag solver(a, b, c);
  std::vector<cxd> w = init.u;
  const double phase0 = cell.lambda * init.t / eps2;
  for (auto& v : w) v *= std::exp(-kI * phase0);
  WavefieldState cur = init;
  rep.mass0 = mass(init);
  rep.grad_energy0 = grad_energy(init);
  std::vector<cxd> rhs(M);
  for (int step = 1; step <= rep.steps; ++step) {
    for (int j = 0; j < M; ++j) {
      const cxd kw = diag[j] * w[j] + off[j] * w[(j + 1) % M] + off[(j - 1 + M) % M] * w[(j - 1 + M) % M];
      rhs[j] = w[j] + hdt * kw;
    }
    w = solver.solve(rhs);
    if (step % per_sample == 0) {
      cur.t = init.t + step * dt;
      const cxd ph = std::exp(kI * (cell.lambda * cur.t / eps2));
      for (int j = 0; j < M; ++j) cur.u[j] = w[j] * ph;
      const double m = mass(cur);
      rep.mass_drift = std::max(rep.mass_drift, std::abs(m - rep.mass0) / rep.mass0);
      if (rep.mass_drift > cfg.mass_abort)
        throw NumericalError("mass drift " + std::to_string(rep.mass_drift) + " exceeds " +
                             std::to_string(cfg.mass_abort));
      rep.snapshots.push_back(cur);
    }
  }
  rep.grad_energy = grad_energy(cur);
  rep.grad_constant = rep.grad_energy / (rep.grad_energy0 + rep.mass0);
  return rep;
}

namespace {

int signed_mode(int k, int q) { return k > q / 2 ? k - q : k; }

// Multiply FFT-order coefficients by exp(i t (4 pi^2 kappa.A kappa + U)).
void propagate_modes(const SampleGrid& g, std::vector<cxd>& c, const MatR& A, double U, double t) {
  const int n = g.dim;
  VecR kap(n);
  for (int idx = 0; idx < g.size(); ++idx) {
    int r = idx;
    for (int a = n - 1; a >= 0; --a) {
      kap(a) = signed_mode(r % g.q, g.q) / g.period;
      r /= g.q;
    }
    const double w = kFourPi2 * kap.dot(A * kap) + U;
    c[idx] *= std::exp(kI * (w * t));
  }
}

}  // namespace

std::vector<cxd> evolve_homogenized(const SampleGrid& g, const std::vector<cxd>& v0, const MatR& A_star,
                                    double U_star, double t) {
  require(A_star.rows() == g.dim && A_star.cols() == g.dim, "A_star has the wrong size");
  std::vector<cxd> c = grid_dft(g, v0);
  propagate_modes(g, c, A_star, U_star, t);
  return grid_idft(g, c);
}

double l2_norm(const SampleGrid& g, const std::vector<cxd>& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s * std::pow(g.period / g.q, g.dim));
}

double corrector_error(const std::vector<WavefieldState>& u_eps, const std::vector<std::vector<cxd>>& v,
                       const DiscreteCell& cell) {
  require(!u_eps.empty() && u_eps.size() == v.size(), "corrector error needs matching snapshot lists");
  const int S = cell.size();
  const double weight = u_eps.size() == 1 ? 1.0 : u_eps.back().t / u_eps.size();
  double total = 0.0;
  for (size_t s = 0; s < u_eps.size(); ++s) {
    const WavefieldState& st = u_eps[s];
    require(static_cast<int>(v[s].size()) == st.M && st.M % S == 0, "grid mismatch");
    const double eps2 = st.eps * st.eps;
    const cxd tphase = std::exp(-kI * (cell.lambda * st.t / eps2));
    double e = 0.0;
    for (int j = 0; j < st.M; ++j) {
      const cxd veps = tphase * std::exp(-kI * (kTwoPi * cell.theta * st.x(j) / st.eps)) * st.u[j];
      e += std::norm(veps - v[s][j] * cell.psi(j % S));
    }
    total += weight * e * st.h();
  }
  return std::sqrt(total);
}

CorrectorRun corrector_study(const CellMedium& medium, const EvolutionConfig& cfg, const Envelope& v0, int band,
                             double theta, const Displacement* z, double eta) {
  CorrectorRun run;
  run.eps = cfg.eps;
  run.cell = discrete_cell(medium, cfg.cell_points, theta, band, z, eta);
  WavefieldState u0 = well_prepared_initial(cfg, run.cell, v0);
  run.initial_mass = mass(u0);
  EvolutionReport rep = evolve_eps(u0, run.cell, cfg);
  SampleGrid g{1, u0.M, cfg.L};
  std::vector<cxd> v00(u0.M);
  for (int j = 0; j < u0.M; ++j) v00[j] = v0({u0.x(j)});
  MatR A(1, 1);
  A(0, 0) = run.cell.A_star;
  std::vector<std::vector<cxd>> vs;
  for (const auto& s : rep.snapshots) vs.push_back(evolve_homogenized(g, v00, A, run.cell.U_star, s.t));
  run.error = corrector_error(rep.snapshots, vs, run.cell);
  run.mass_drift = rep.mass_drift;
  run.grad_constant = rep.grad_constant;
  run.dt = rep.dt;
  run.steps = rep.steps;
  return run;
}

std::vector<cxd> duhamel(const SampleGrid& g, const std::vector<cxd>& w0, const MatR& A, double U,
                         const SourceFn& source, double t, int panels) {
  static const double xg[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double wg[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  require(panels >= 1, "Duhamel quadrature needs at least one panel");
  std::vector<cxd> acc = grid_dft(g, w0);
  propagate_modes(g, acc, A, U, t);
  const double hp = t / panels;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < 8; ++i) {
      const double s = p * hp + 0.5 * hp * (xg[i] + 1.0);
      std::vector<cxd> src = grid_dft(g, source(s));
      propagate_modes(g, src, A, U, t - s);
      const cxd f = -kI * (0.5 * hp * wg[i]);
      for (size_t k = 0; k < acc.size(); ++k) acc[k] += f * src[k];
    }
  return grid_idft(g, acc);
}

namespace {

MatR sqrt_spd(const MatR& A, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<MatR> es(0.5 * (A + A.transpose()));
  if (es.eigenvalues().minCoeff() <= 0)
    throw NumericalError(what + " is not positive definite");
  return es.operatorSqrt();
}

std::vector<cxd> rescaled(const SampleGrid& box, const Envelope& v0, const MatR& S) {
  std::vector<cxd> out(box.size());
  const int n = box.dim;
  for (int idx = 0; idx < box.size(); ++idx) {
    std::vector<double> x = box.point(idx);
    VecR xv(n);
    for (int a = 0; a < n; ++a) {
      x[a] -= 0.5 * box.period;
      xv(a) = x[a];
    }
    VecR y = S * xv;
    out[idx] = v0(std::vector<double>(y.data(), y.data() + n));
  }
  return out;
}

}  // namespace

SplittingResult splitting_series(const SplittingInput& in, const Envelope& v0, const SampleGrid& box, double T,
                                 double fd_step) {
  const int n = box.dim;
  require(in.A_per.rows() == n && in.A1.rows() == n, "splitting tensors have the wrong size");
  require(in.etas.size() == in.A_eta.size() && in.etas.size() == in.U_eta.size(),
          "eta list and oracle values differ in length");
  const MatR I = MatR::Identity(n, n);
  const std::vector<cxd> V0 = rescaled(box, v0, sqrt_spd(in.A_per, "A*_per"));
  const std::vector<cxd> Vp = evolve_homogenized(box, V0, I, in.U_per, T);
  // Initial datum of the first-order envelope: d/d eta of v0(sqrt(A_per + eta A1) x).
  std::vector<cxd> w0(box.size());
  {
    auto vp = rescaled(box, v0, sqrt_spd(in.A_per + fd_step * in.A1, "A*_per + h A1"));
    auto vm = rescaled(box, v0, sqrt_spd(in.A_per - fd_step * in.A1, "A*_per - h A1"));
    for (int i = 0; i < box.size(); ++i) w0[i] = (vp[i] - vm[i]) / (2.0 * fd_step);
  }
  // Closed form per mode: w(t) = e^{i w t} (w0 + i U1 t V0).
  std::vector<cxd> shifted(box.size());
  for (int i = 0; i < box.size(); ++i) shifted[i] = w0[i] + kI * (in.U1 * T) * V0[i];
  const std::vector<cxd> W = evolve_homogenized(box, shifted, I, in.U_per, T);
  SourceFn src = [&](double s) {
    std::vector<cxd> v = evolve_homogenized(box, V0, I, in.U_per, s);
    for (auto& x : v) x *= -in.U1;
    return v;
  };
  const std::vector<cxd> Wq = duhamel(box, w0, I, in.U_per, src, T);
  SplittingResult r;
  {
    std::vector<cxd> d(box.size());
    for (int i = 0; i < box.size(); ++i) d[i] = W[i] - Wq[i];
    r.duhamel_discrepancy = l2_norm(box, d);
    r.w_norm = l2_norm(box, W);
  }
  for (size_t e = 0; e < in.etas.size(); ++e) {
    const double eta = in.etas[e];
    const std::vector<cxd> V0e = rescaled(box, v0, sqrt_spd(in.A_eta[e], "A*(eta)"));
    const std::vector<cxd> Ve = evolve_homogenized(box, V0e, I, in.U_eta[e], T);
    std::vector<cxd> d(box.size());
    for (int i = 0; i < box.size(); ++i) d[i] = Ve[i] - Vp[i] - eta * W[i];
    r.etas.push_back(eta);
    r.residuals.push_back(l2_norm(box, d));
  }
  r.slope = loglog_slope(r.etas, r.residuals);
  return r;
}

void write_snapshot(const std::string& path, const WavefieldState& s) {
  std::ofstream bin(path + ".bin", std::ios::binary);
  require(bin.good(), "cannot open snapshot file " + path + ".bin");
  for (const auto& v : s.u) {
    double re = v.real(), im = v.imag();
    bin.write(reinterpret_cast<const char*>(&re), sizeof(double));
    bin.write(reinterpret_cast<const char*>(&im), sizeof(double));
  }
  nlohmann::json j;
  j["grid"] = {{"dim", s.dim}, {"points", s.M}, {"box", s.L}};
  j["t"] = s.t;
  j["eps"] = s.eps;
  j["dtype"] = "complex128-le";
  std::ofstream side(path + ".json");
  side << j.dump(2) << "\n";
}

}  // namespace bwh
