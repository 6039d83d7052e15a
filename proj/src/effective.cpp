#include "bwh/effective.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace bwh {

namespace {

double mass_norm2(const CellForm& form, const VecC& v) {
  return form.has_mass() ? form.pair(form.J, v, v).real() : v.squaredNorm();
}

VecC apply_mass(const CellForm& form, const VecC& v) {
  return form.has_mass() ? form.apply(form.J, v) : v;
}

// sum_i w_i f_i over difference fields (empty fields are skipped).
DiffField combine(const std::vector<const DiffField*>& fs, const std::vector<double>& w) {
  DiffField out;
  for (size_t i = 0; i < fs.size(); ++i) {
    if (fs[i]->empty() || w[i] == 0.0) continue;
    if (out.empty()) out.c.assign(fs[i]->c.size(), 0.0);
    for (size_t j = 0; j < out.c.size(); ++j) out.c[j] += w[i] * fs[i]->c[j];
  }
  return out;
}

MatR real_sym(const MatC& B) {
  MatC s = 0.5 * (B + B.transpose());
  return s.real();
}

double max_rel(const MatR& a, const MatR& b) {
  double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double lambda_at(const CellForm& form, const VecR& theta, int band) {
  return all_eigenvalues(form.bloch(theta))(band);
}

}  // namespace

BandPoint band_point(const CellForm& form, const VecR& theta, int band, double crossing_tol) {
  const int F = form.size();
  require(band >= 0 && band < F, "band index out of range");
  BlochMatrix m = form.bloch(theta);
  const int count = std::min(F, band + 2);
  auto pts = lowest_bands(m, count);
  if (band + 1 < count && pts[band + 1].lambda - pts[band].lambda < crossing_tol)
    throw NumericalError("band crossing: gap to band " + std::to_string(band + 1) + " is " +
                         std::to_string(pts[band + 1].lambda - pts[band].lambda));
  if (band > 0 && pts[band].lambda - pts[band - 1].lambda < crossing_tol)
    throw NumericalError("band crossing: gap to band " + std::to_string(band - 1) + " is " +
                         std::to_string(pts[band].lambda - pts[band - 1].lambda));
  return pts[band];
}

CriticalResult find_critical(const CellForm& form, int band, const VecR& theta_init,
                             const CriticalOptions& opt) {
  const int n = form.n;
  require(theta_init.size() == n, "theta_init has the wrong dimension");
  auto inside = [&](const VecR& t) { return t.cwiseAbs().maxCoeff() <= opt.box; };
  require(inside(theta_init), "theta_init lies outside the reduced cell");
  CriticalResult res;
  VecR theta = theta_init;
  BandPoint pt = band_point(form, theta, band, opt.crossing_tol);
  VecR g = hf_gradient(form, pt);
  for (int it = 0; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    if (g.norm() <= opt.grad_tol) {
      res.point = pt;
      res.grad_norm = g.norm();
      return res;
    }
    if (it == opt.max_iterations) break;
    AuxiliaryFields aux = first_auxiliary(form, pt);
    MatR hess = kFourPi2 * sac_hessian(form, pt, aux);
    Eigen::SelfAdjointEigenSolver<MatR> es(hess);
    const VecR ev = es.eigenvalues();
    const double hmax = ev.cwiseAbs().maxCoeff();
    const bool definite = ev.minCoeff() > 1e-10 * hmax || ev.maxCoeff() < -1e-10 * hmax;
    bool moved = false;
    if (definite) {
      VecR step = -hess.ldlt().solve(g);
      double alpha = 1.0;
      for (int bt = 0; bt < 40 && !moved; ++bt, alpha *= 0.5) {
        VecR trial = theta + alpha * step;
        if (!inside(trial)) continue;
        BandPoint tp = band_point(form, trial, band, opt.crossing_tol);
        VecR tg = hf_gradient(form, tp);
        if (tg.norm() < g.norm()) {
          theta = trial;
          pt = tp;
          g = tg;
          moved = true;
        }
      }
    }
    if (!moved) {
      // Grid-refined search for the smallest gradient around theta.
      ++res.fallbacks;
      const double span = std::min(0.05, std::max(10.0 * g.norm() / std::max(hmax, 1.0), 1e-6));
      const int s = 5;
      int total = 1;
      for (int a = 0; a < n; ++a) total *= s;
      VecR best = theta;
      double bestg = g.norm();
      BandPoint bestp = pt;
      for (int idx = 0; idx < total; ++idx) {
        VecR trial = theta;
        int r = idx;
        for (int a = 0; a < n; ++a) {
          trial(a) += span * ((r % s) - s / 2) / (s / 2);
          r /= s;
        }
        if (!inside(trial)) continue;
        BandPoint tp = band_point(form, trial, band, opt.crossing_tol);
        double tg = hf_gradient(form, tp).norm();
        if (tg < bestg) {
          bestg = tg;
          best = trial;
          bestp = tp;
        }
      }
      if (bestg >= g.norm())
        throw NumericalError("critical-point search stalled at |grad| = " + std::to_string(g.norm()));
      theta = best;
      pt = bestp;
      g = hf_gradient(form, pt);
    }
  }
  throw NumericalError("critical-point search did not converge in " + std::to_string(opt.max_iterations) +
                       " iterations (|grad| = " + std::to_string(g.norm()) + ")");
}

CriticalResult find_critical(const CellMedium& medium, const FourierLattice& lat, int band,
                             const VecR& theta_init, const CriticalOptions& opt) {
  return find_critical(form_from_medium(medium, lat), band, theta_init, opt);
}

MatR fd_hessian(const CellForm& form, const VecR& theta, int band, double h) {
  const int n = form.n;
  MatR H(n, n);
  const double f0 = lambda_at(form, theta, band);
  auto at = [&](int a, double da, int b, double db) {
    VecR t = theta;
    t(a) += da;
    t(b) += db;
    return lambda_at(form, t, band);
  };
  for (int a = 0; a < n; ++a) {
    double fp1 = at(a, h, a, 0), fm1 = at(a, -h, a, 0), fp2 = at(a, 2 * h, a, 0), fm2 = at(a, -2 * h, a, 0);
    H(a, a) = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      auto cross = [&](double s) {
        return (at(a, s, b, s) - at(a, s, b, -s) - at(a, -s, b, s) + at(a, -s, b, -s)) / (4 * s * s);
      };
      H(a, b) = H(b, a) = (4 * cross(h) - cross(2 * h)) / 3;
    }
  return H;
}

std::string route_name(Route r) {
  switch (r) {
    case Route::bilinear: return "bilinear";
    case Route::hessian_fd: return "hessian_fd";
    case Route::sac: return "sac";
  }
  return "unknown";
}

MatC tensor_t1(const CellForm& form, const VecC& f, const VecC& g) {
  const int n = form.n;
  MatC T(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) T(k, l) = form.pair(form.AJ[k * n + l], g, f);
  return T;
}

MatC tensor_t2(const CellForm& form, const VecR& theta, const VecC& f, const std::vector<VecC>& x) {
  const int n = form.n;
  MatC T = MatC::Zero(n, n);
  for (int l = 0; l < n; ++l) {
    std::vector<VecC> Lf(n);
    for (int b = 0; b < n; ++b) Lf[b] = form.apply(form.L[l * n + b], f);
    std::vector<const DiffField*> fs;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      fs.push_back(&form.AJ[i * n + l]);
      w.push_back(theta(i));
    }
    VecC Af = form.apply(combine(fs, w), f);
    for (int k = 0; k < n; ++k) {
      cxd s = 0.0;
      for (int b = 0; b < n; ++b) s += form.grad(x[k], b).dot(Lf[b]);
      s += ((kI * kTwoPi) * x[k]).dot(Af);
      T(k, l) = s;
    }
  }
  return T;
}

MatC tensor_t3(const CellForm& form, const VecR& theta, const VecC& f, const std::vector<VecC>& x) {
  const int n = form.n;
  MatC T = MatC::Zero(n, n);
  std::vector<VecC> Gf(n);
  for (int b = 0; b < n; ++b) Gf[b] = form.grad(f, b);
  for (int l = 0; l < n; ++l) {
    VecC s = VecC::Zero(form.size());
    for (int b = 0; b < n; ++b) s += form.apply(form.L[l * n + b], Gf[b]);
    std::vector<const DiffField*> fs;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      fs.push_back(&form.AJ[l * n + i]);
      w.push_back(theta(i));
    }
    s += form.apply(combine(fs, w), VecC((kI * kTwoPi) * f));
    for (int k = 0; k < n; ++k) T(k, l) = x[k].dot(s);
  }
  return T;
}

MatC bilinear_tensor(const CellForm& form, const VecR& theta, const VecC& psi, const std::vector<VecC>& xi) {
  return tensor_t1(form, psi, psi) + tensor_t2(form, theta, psi, xi) - tensor_t3(form, theta, psi, xi);
}

EffectiveCoefficients effective_coefficients(const CellForm& form, const BandPoint& p,
                                             const AuxiliaryFields& aux, const EffectiveOptions& opt) {
  require(static_cast<int>(aux.xi.size()) == form.n, "auxiliary fields do not match the dimension");
  EffectiveCoefficients e;
  e.theta_star = p.theta;
  e.band = p.band;
  e.lambda_star = p.lambda;
  e.grad_norm = hf_gradient(form, p).norm();
  if (e.grad_norm > 1e-8)
    throw NumericalError("effective coefficients need a critical point (|grad| = " +
                         std::to_string(e.grad_norm) + ")");
  e.c_psi = mass_norm2(form, p.psi);
  ensure(e.c_psi > 0, "eigenfunction has zero mass");
  e.B = bilinear_tensor(form, p.theta, p.psi, aux.xi) / e.c_psi;
  e.A_star = real_sym(e.B);
  e.U_star = form.UJ.empty() ? 0.0 : form.pair(form.UJ, p.psi, p.psi).real() / e.c_psi;
  if (opt.check_routes) {
    e.A_fd = fd_hessian(form, p.theta, p.band, opt.fd_step) / (2.0 * kFourPi2);
    e.A_sac = 0.5 * hessian_via_sac(form, p, aux);
    e.route_discrepancy = std::max({max_rel(e.A_star, e.A_fd), max_rel(e.A_star, e.A_sac), max_rel(e.A_fd, e.A_sac)});
    if (e.route_discrepancy > opt.route_tol)
      throw ConfigError("effective tensor routes disagree: relative discrepancy " +
                        std::to_string(e.route_discrepancy) + " above " + std::to_string(opt.route_tol) +
                        " (increase the cutoff)");
  }
  return e;
}

EffectiveCoefficients effective_coefficients(const CellMedium& medium, const FourierLattice& lat,
                                             const BandPoint& p, const AuxiliaryFields& aux,
                                             const EffectiveOptions& opt) {
  return effective_coefficients(form_from_medium(medium, lat), p, aux, opt);
}

PerturbationSeries quasi_perfect_series(const CellForm& form0, const CellForm& form1, const BandPoint& p,
                                        const AuxiliaryFields& aux, const CorrectorFields& corr) {
  const int n = form0.n;
  require(static_cast<int>(aux.xi.size()) == n, "auxiliary fields do not match the dimension");
  require(static_cast<int>(corr.xi1.size()) == n && corr.psi1.size() == form0.size(),
          "missing corrector fields");
  ensure(corr.solvability <= 1e-8, "corrector fields fail the solvability check");
  const VecR& th = p.theta;
  const double c0 = mass_norm2(form0, p.psi);
  const VecC psi = p.psi / std::sqrt(c0);
  const VecC& psi1 = corr.psi1;
  const auto& xi = aux.xi;
  const auto& xi1 = corr.xi1;
  const cxd gauge = apply_mass(form0, psi).dot(psi1);
  if (std::abs(gauge - corr.gauge_alpha) > 1e-10)
    throw NumericalError("corrector gauge residual " + std::to_string(std::abs(gauge - corr.gauge_alpha)));

  PerturbationSeries s;
  s.correctors = corr;
  s.theta1 = corr.theta1;
  s.lambda1 = corr.lambda1;
  s.c0 = 1.0;
  s.B0 = bilinear_tensor(form0, th, psi, xi);
  s.A0 = real_sym(s.B0);
  const VecR th1 = th + corr.theta1;
  MatC num1 = tensor_t1(form1, psi, psi) + tensor_t1(form0, psi1, psi) + tensor_t1(form0, psi, psi1);
  num1 += tensor_t2(form1, th, psi, xi) + tensor_t2(form0, th, psi1, xi) + tensor_t2(form0, th, psi, xi1) +
          (tensor_t2(form0, th1, psi, xi) - tensor_t2(form0, th, psi, xi));
  num1 -= tensor_t3(form1, th, psi, xi) + tensor_t3(form0, th, psi1, xi) + tensor_t3(form0, th, psi, xi1) +
          (tensor_t3(form0, th1, psi, xi) - tensor_t3(form0, th, psi, xi));
  s.c1 = (form1.J.empty() ? 0.0 : form1.pair(form1.J, psi, psi).real()) +
         2.0 * apply_mass(form0, psi).dot(psi1).real();
  s.B1 = num1 - s.c1 * s.B0;
  s.A1 = real_sym(s.B1);
  const bool u0 = !form0.UJ.empty();
  s.U0 = u0 ? form0.pair(form0.UJ, psi, psi).real() : 0.0;
  s.U1 = (form1.UJ.empty() ? 0.0 : form1.pair(form1.UJ, psi, psi).real()) +
         (u0 ? 2.0 * form0.pair(form0.UJ, psi, psi1).real() : 0.0) - s.c1 * s.U0;
  return s;
}

PerturbationSeries quasi_perfect_series(const CellMedium& medium, const FourierLattice& lat,
                                        const BandPoint& p, const AuxiliaryFields& aux,
                                        const CorrectorFields& corr, const GradientStats& stats) {
  CellForm f0 = form_from_medium(medium, lat);
  CellForm f1 = first_order_form(medium, lat, stats.grid, stats.EgradZ);
  return quasi_perfect_series(f0, f1, p, aux, corr);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return std::nan("");
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::nan("");
}

OracleTable supercell_oracle(const CellMedium& medium, const Displacement& z, const std::vector<double>& etas,
                             int band, const VecR& theta_star, const PerturbationSeries& series,
                             const OracleOptions& opt) {
  require(!etas.empty(), "eta list is empty");
  const int p = z.period();
  const int n = medium.adim;
  FourierLattice ulat = build_lattice(medium.dim, opt.cutoff);
  FourierLattice slat = build_lattice(medium.dim, opt.cutoff * p, p);
  CellForm fu = form_from_medium(medium, ulat);
  BandPoint pu = band_point(fu, theta_star, band, opt.critical.crossing_tol);
  const double lambda_per = pu.lambda;
  EffectiveOptions eo;
  eo.check_routes = false;
  const MatR A_per = effective_coefficients(fu, pu, first_auxiliary(fu, pu), eo).A_star;
  const MatR A1 = series.A1.size() ? series.A1 : MatR::Zero(n, n);

  OracleTable t;
  t.band_unit = band;
  t.period = p;
  {
    CellForm f0 = deformed_form(medium, z, 0.0, slat, opt.deformed);
    VecR ev = all_eigenvalues(f0.bloch(theta_star));
    int best = 0;
    for (int i = 1; i < ev.size(); ++i)
      if (std::abs(ev(i) - lambda_per) < std::abs(ev(best) - lambda_per)) best = i;
    if (std::abs(ev(best) - lambda_per) > 1e-8 * std::max(1.0, std::abs(lambda_per)))
      throw NumericalError("unit-cell band not found in the supercell spectrum");
    t.band_super = best;
  }
  VecR theta = theta_star;
  std::vector<double> xs, yl, ya;
  for (double eta : etas) {
    CellForm f = deformed_form(medium, z, eta, slat, opt.deformed);
    CriticalResult cr = find_critical(f, t.band_super, theta, opt.critical);
    AuxiliaryFields aux = first_auxiliary(f, cr.point);
    EffectiveCoefficients e = effective_coefficients(f, cr.point, aux, eo);
    OracleRow r;
    r.eta = eta;
    r.theta_star = cr.point.theta;
    r.lambda = cr.point.lambda;
    r.A_star = e.A_star;
    r.U_star = e.U_star;
    r.iterations = cr.iterations;
    r.lambda_remainder = std::abs(r.lambda - lambda_per - eta * series.lambda1);
    r.A_remainder = (r.A_star - A_per - eta * A1).norm();
    t.rows.push_back(r);
    if (eta > 0) {
      xs.push_back(eta);
      yl.push_back(r.lambda_remainder);
      ya.push_back(r.A_remainder);
    }
  }
  t.slope_lambda = loglog_slope(xs, yl);
  t.slope_A = loglog_slope(xs, ya);
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    t.pair_slopes_lambda.push_back(loglog_slope({xs[i], xs[i + 1]}, {yl[i], yl[i + 1]}));
    t.pair_slopes_A.push_back(loglog_slope({xs[i], xs[i + 1]}, {ya[i], ya[i + 1]}));
  }
  return t;
}

void write_oracle_csv(std::ostream& os, const OracleTable& t) {
  const int n = t.rows.empty() ? 0 : static_cast<int>(t.rows[0].A_star.rows());
  os << "eta";
  for (int a = 0; a < n; ++a) os << ",theta_" << (a + 1);
  os << ",lambda";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) os << ",a" << (i + 1) << (j + 1);
  os << ",U_star,lambda_remainder,A_remainder,slope_lambda,slope_A\n";
  os.precision(17);
  for (const auto& r : t.rows) {
    os << r.eta;
    for (int a = 0; a < n; ++a) os << "," << r.theta_star(a);
    os << "," << r.lambda;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) os << "," << r.A_star(i, j);
    os << "," << r.U_star << "," << r.lambda_remainder << "," << r.A_remainder << "," << t.slope_lambda << ","
       << t.slope_A << "\n";
  }
}

}  // namespace bwh
