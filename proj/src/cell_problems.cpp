#include "bwh/cell_problems.hpp"

#include <cmath>
#include <ostream>

#include <Eigen/Dense>

namespace bwh {

ConstrainedSolver::ConstrainedSolver(const BlochMatrix& m, double lambda, const std::vector<VecC>& kernel,
                                     double solvability_tol)
    : tol_(solvability_tol) {
  const int F = static_cast<int>(m.H.rows());
  const int h = static_cast<int>(kernel.size());
  require(h >= 1, "constrained solve needs a non-empty kernel basis");
  const MatC M = m.has_mass() ? m.M : MatC::Identity(F, F);
  A_ = m.H - lambda * M;
  K_.resize(F, h);
  for (int k = 0; k < h; ++k) {
    require(kernel[k].size() == F, "kernel vector has the wrong size");
    K_.col(k) = kernel[k];
  }
  MatC gram = K_.adjoint() * M * K_;
  require((gram - MatC::Identity(h, h)).norm() <= 1e-8, "kernel basis is not M-orthonormal");
  const double scale = std::max(1.0, A_.cwiseAbs().rowwise().sum().maxCoeff());
  require((A_ * K_).norm() <= 1e-7 * scale, "kernel basis does not span the kernel of H - lambda M");
  MK_ = M * K_;
  MatC big = MatC::Zero(F + h, F + h);
  big.topLeftCorner(F, F) = A_;
  big.topRightCorner(F, h) = MK_;
  big.bottomLeftCorner(h, F) = MK_.adjoint();
  lu_.compute(big);
  ensure(std::isfinite(lu_.rcond()) && lu_.rcond() > 1e-15, "singular reduced system in constrained solve");
}

double ConstrainedSolver::kernel_projection(const VecC& rhs) const {
  const double s = std::max(1.0, rhs.norm());
  return (K_.adjoint() * rhs).cwiseAbs().maxCoeff() / s;
}

VecC ConstrainedSolver::solve(const VecC& rhs) const {
  const int F = static_cast<int>(A_.rows());
  const int h = static_cast<int>(K_.cols());
  double proj = kernel_projection(rhs);
  if (proj > tol_)
    throw NumericalError("solvability violation: kernel projection " + std::to_string(proj) +
                         " exceeds " + std::to_string(tol_));
  VecC b = VecC::Zero(F + h);
  b.head(F) = rhs;
  VecC x = lu_.solve(b);
  VecC u = x.head(F);
  VecC target = rhs - MK_ * x.tail(h);
  double rn = std::max(target.norm(), 1e-300);
  last_residual_ = (A_ * u - target).norm() / rn;
  if (target.norm() > 0 && last_residual_ > 1e-9)
    throw NumericalError("constrained solve residual " + std::to_string(last_residual_) + " above 1e-9");
  return u;
}

VecC constrained_solve(const BlochMatrix& m, double lambda, const std::vector<VecC>& kernel, const VecC& rhs) {
  return ConstrainedSolver(m, lambda, kernel).solve(rhs);
}

namespace {

double mass_norm2(const CellForm& form, const VecC& v) {
  return form.has_mass() ? form.pair(form.J, v, v).real() : v.squaredNorm();
}

VecC apply_mass(const CellForm& form, const VecC& v) {
  return form.has_mass() ? form.apply(form.J, v) : v;
}

void require_simple(const BlochMatrix& m, const BandPoint& p) {
  VecR ev = all_eigenvalues(m);
  const double tol = 1e-7 * std::max(1.0, std::abs(p.lambda));
  int h = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i) - p.lambda) <= tol) ++h;
  if (h != 1)
    throw NumericalError("eigenvalue " + std::to_string(p.lambda) + " has multiplicity " +
                         std::to_string(h) + " (simple band required)");
}

}  // namespace

VecR hf_gradient(const CellForm& form, const BandPoint& p) {
  const double c = mass_norm2(form, p.psi);
  VecR g(form.n);
  for (int k = 0; k < form.n; ++k) g(k) = p.psi.dot(form.dtheta(p.theta, k) * p.psi).real() / c;
  return g;
}

AuxiliaryFields first_auxiliary(const CellForm& form, const BandPoint& p) {
  BlochMatrix m = form.bloch(p.theta);
  require_simple(m, p);
  VecC psi = p.psi / std::sqrt(mass_norm2(form, p.psi));
  ConstrainedSolver solver(m, p.lambda, {psi});
  AuxiliaryFields aux;
  aux.grad_lambda = VecR(form.n);
  const VecC Mpsi = apply_mass(form, psi);
  for (int k = 0; k < form.n; ++k) {
    MatC Dk = form.dtheta(p.theta, k);
    VecC Dpsi = Dk * psi;
    double gk = psi.dot(Dpsi).real();
    aux.grad_lambda(k) = gk;
    VecC rhs = -(Dpsi - gk * Mpsi);
    VecC pk = solver.solve(rhs);
    aux.residual = std::max(aux.residual, solver.last_residual());
    VecC xi = pk / (kI * kTwoPi);
    aux.gauge.push_back(Mpsi.dot(xi));
    aux.xi.push_back(std::move(xi));
  }
  return aux;
}

AuxiliaryFields first_auxiliary(const CellMedium& medium, const FourierLattice& lat, const BandPoint& p) {
  return first_auxiliary(form_from_medium(medium, lat), p);
}

MatR sac_hessian(const CellForm& form, const BandPoint& p, const AuxiliaryFields& aux) {
  const int n = form.n;
  const double c = mass_norm2(form, p.psi);
  const VecC psi = p.psi / std::sqrt(c);
  std::vector<VecC> pk(n);
  std::vector<MatC> D(n);
  for (int k = 0; k < n; ++k) {
    pk[k] = aux.psi_k(k);
    D[k] = form.dtheta(p.theta, k);
  }
  MatR out(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      cxd s = psi.dot(form.dtheta2(k, l) * psi);
      s += psi.dot(D[k] * pk[l] - aux.grad_lambda(k) * apply_mass(form, pk[l]));
      s += psi.dot(D[l] * pk[k] - aux.grad_lambda(l) * apply_mass(form, pk[k]));
      out(k, l) = s.real() / kFourPi2;
    }
  return 0.5 * (out + out.transpose());
}

MatR hessian_via_sac(const CellForm& form, const BandPoint& p, const AuxiliaryFields& aux) {
  VecR g = hf_gradient(form, p);
  if (g.norm() > 1e-8)
    throw NumericalError("gradient of lambda is not zero at the requested point (|grad| = " +
                         std::to_string(g.norm()) + ")");
  return sac_hessian(form, p, aux);
}

MatR hessian_via_sac(const CellMedium& medium, const FourierLattice& lat, const BandPoint& p,
                     const AuxiliaryFields& aux) {
  return hessian_via_sac(form_from_medium(medium, lat), p, aux);
}

CorrectorFields first_order_correctors(const CellForm& form0, const CellForm& form1, const BandPoint& p,
                                       const AuxiliaryFields& aux, cxd gauge_alpha) {
  const int n = form0.n;
  const VecR& th = p.theta;
  BlochMatrix m0 = form0.bloch(th);
  require_simple(m0, p);
  const VecC psi = p.psi / std::sqrt(mass_norm2(form0, p.psi));
  VecR g = hf_gradient(form0, p);
  if (g.norm() > 1e-8) throw NumericalError("first-order correctors need a critical point");
  MatR hess = kFourPi2 * sac_hessian(form0, p, aux);
  if (std::abs(hess.determinant()) < 1e-12 * std::pow(std::max(1.0, hess.norm()), n))
    throw NumericalError("singular theta^(1) system: degenerate Hessian");

  const MatC M0 = form0.mass();
  const MatC H1 = form1.stiffness(th);
  const MatC M1 = form1.mass();
  std::vector<MatC> D(n), D1(n);
  std::vector<VecC> pk(n);
  for (int k = 0; k < n; ++k) {
    D[k] = form0.dtheta(th, k);
    D1[k] = form1.dtheta(th, k);
    pk[k] = aux.psi_k(k);
  }
  const double lambda0 = p.lambda;
  const double lambda1 = psi.dot((H1 - lambda0 * M1) * psi).real();
  ConstrainedSolver solver(m0, lambda0, {psi});

  auto first_op = [&](const VecR& t1) {
    MatC op = H1 - lambda1 * M0 - lambda0 * M1;
    for (int l = 0; l < n; ++l) op += t1(l) * D[l];
    return op;
  };
  auto psi1_of = [&](const VecR& t1) {
    VecC r = -(first_op(t1) * psi);
    return VecC(solver.solve(r) + gauge_alpha * psi);
  };
  auto rhs_xi = [&](const VecR& t1, const VecC& psi1, int k) {
    MatC dk1 = D1[k];
    for (int l = 0; l < n; ++l) dk1 += t1(l) * form0.dtheta2(k, l);
    return VecC(-(first_op(t1) * pk[k]) - dk1 * psi - D[k] * psi1);
  };

  // Solvability of the xi^(1) equations is affine in theta^(1).
  VecR zero = VecR::Zero(n);
  VecC psi1_0 = psi1_of(zero);
  VecC s0(n);
  for (int k = 0; k < n; ++k) s0(k) = psi.dot(rhs_xi(zero, psi1_0, k));
  MatC S(n, n);
  for (int l = 0; l < n; ++l) {
    VecR e = VecR::Unit(n, l);
    VecC psi1_e = psi1_of(e);
    for (int k = 0; k < n; ++k) S(k, l) = psi.dot(rhs_xi(e, psi1_e, k)) - s0(k);
  }
  MatR Sr(2 * n, n);
  VecR br(2 * n);
  Sr.topRows(n) = S.real();
  Sr.bottomRows(n) = S.imag();
  br.head(n) = -s0.real();
  br.tail(n) = -s0.imag();
  VecR theta1 = Sr.colPivHouseholderQr().solve(br);

  CorrectorFields out;
  out.lambda1 = lambda1;
  out.theta1 = theta1;
  out.theta_system = S.real();
  out.gauge_alpha = gauge_alpha;
  out.psi1 = psi1_of(theta1);
  for (int k = 0; k < n; ++k) {
    VecC r = rhs_xi(theta1, out.psi1, k);
    out.solvability = std::max(out.solvability, solver.kernel_projection(r));
    out.xi1.push_back(solver.solve(r) / (kI * kTwoPi));
  }
  out.solvability = std::max(out.solvability, solver.kernel_projection(-(first_op(theta1) * psi)));
  if (out.solvability > 1e-8)
    throw NumericalError("corrector solvability residual " + std::to_string(out.solvability) + " above 1e-8");
  return out;
}

CorrectorFields first_order_correctors(const CellMedium& medium, const FourierLattice& lat,
                                       const BandPoint& p, const AuxiliaryFields& aux,
                                       const GradientStats& stats, cxd gauge_alpha) {
  CellForm f0 = form_from_medium(medium, lat);
  CellForm f1 = first_order_form(medium, lat, stats.grid, stats.EgradZ);
  return first_order_correctors(f0, f1, p, aux, gauge_alpha);
}

void write_coefficients_csv(std::ostream& os, const VecC& v) {
  os << "index,re,im\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << i << "," << v(i).real() << "," << v(i).imag() << "\n";
}

}  // namespace bwh
