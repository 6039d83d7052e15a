#include "bwh/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace bwh {

namespace {

int order(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

double spectral_norm(const MatC& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatC> svd(a);
  return svd.singularValues()(0);
}

}  // namespace

void MatrixSeries::add(const MultiIndex& alpha, const MatC& a) {
  require(static_cast<int>(alpha.size()) == nvars, "multi-index has the wrong number of variables");
  for (int v : alpha) require(v >= 0, "multi-index entries must be non-negative");
  if (d == 0) d = static_cast<int>(a.rows());
  require(a.rows() == d && a.cols() == d, "coefficient has the wrong size");
  auto it = coeffs.find(alpha);
  if (it == coeffs.end())
    coeffs.emplace(alpha, a);
  else
    it->second += a;
}

MatC MatrixSeries::at(const VecR& z) const {
  require(z.size() == nvars, "sample point has the wrong number of variables");
  MatC out = MatC::Zero(d, d);
  for (const auto& [alpha, a] : coeffs) {
    double w = 1.0;
    for (int v = 0; v < nvars; ++v) w *= std::pow(z(v), alpha[v]);
    out += w * a;
  }
  return out;
}

double MatrixSeries::hermitian_defect() const {
  double m = 0.0;
  for (const auto& [alpha, a] : coeffs) m = std::max(m, (a - a.adjoint()).cwiseAbs().maxCoeff());
  return m;
}

void MatrixSeries::validate() const {
  require(!coeffs.empty(), "matrix series has no coefficients");
  require(hermitian_defect() <= 1e-12, "matrix series coefficient is not Hermitian");
  if (tail_c) require(*tail_c > 0, "declared tail constant must be positive");
}

MatrixSeries linear_family(const MatC& A0, const MatC& A1) {
  MatrixSeries s;
  s.nvars = 1;
  s.add({0}, A0);
  s.add({1}, A1);
  return s;
}

double series_radius(const MatrixSeries& s) {
  require(!s.coeffs.empty(), "matrix series has no coefficients");
  if (s.tail_c) return 1.0 / *s.tail_c;
  return std::numeric_limits<double>::infinity();
}

MatC pseudo_inverse(const MatC& A0, double lambda, const std::vector<VecC>& psi, double tol) {
  const int d = static_cast<int>(A0.rows());
  require(A0.cols() == d, "matrix must be square");
  require(!psi.empty(), "kernel basis is empty");
  MatC K(d, psi.size());
  for (size_t k = 0; k < psi.size(); ++k) {
    require(psi[k].size() == d, "kernel vector has the wrong size");
    K.col(k) = psi[k];
  }
  const MatC shifted = A0 - lambda * MatC::Identity(d, d);
  const double scale = std::max(1.0, A0.cwiseAbs().maxCoeff());
  require((K.adjoint() * K - MatC::Identity(psi.size(), psi.size())).cwiseAbs().maxCoeff() <= 1e-10,
          "kernel basis is not orthonormal");
  require((shifted * K).cwiseAbs().maxCoeff() <= tol * scale, "eigvecs are not a kernel basis of A0 - lambda");
  const MatC P = K * K.adjoint();
  const MatC Q = MatC::Identity(d, d) - P;
  // (A0 - lambda + P) is invertible once the kernel is exactly spanned by psi.
  Eigen::FullPivLU<MatC> lu(shifted + P);
  ensure(lu.isInvertible(), "A0 - lambda has kernel beyond the supplied basis");
  MatC R = Q * lu.solve(Q);
  R = 0.5 * (R + R.adjoint());
  const MatC check = R * shifted - Q;
  ensure(check.cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, R.cwiseAbs().maxCoeff()),
         "pseudo-inverse identity R (A0 - lambda) = I - P violated");
  return R;
}

double smallness_window(const MatrixSeries& s, const MatC& R) {
  const double r = series_radius(s);
  double c = 0.0, chat = 0.0;
  for (const auto& [alpha, a] : s.coeffs) {
    const int k = order(alpha);
    if (k == 0) continue;
    const double nrm = spectral_norm(a);
    c = std::max(c, std::pow(nrm, 1.0 / k));
    if (k == 1) chat = std::max(chat, nrm);
  }
  const double rn = spectral_norm(R);
  if (rn == 0.0) return r;
  return std::min(r, 1.0 / (8.0 * rn * std::max(1.0, c * c * chat)));
}

void dense_spectrum(const MatC& A, VecR& values, MatC& vectors) {
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (A + A.adjoint()));
  ensure(es.info() == Eigen::Success, "dense eigensolver failed");
  values = es.eigenvalues();
  vectors = es.eigenvectors();
}

std::vector<int> max_weight_assignment(const MatR& w) {
  // Hungarian method (potentials form) on cost = -w, rows <= cols.
  const int n = static_cast<int>(w.rows());
  const int m = static_cast<int>(w.cols());
  require(n <= m, "assignment needs at least as many columns as rows");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -w(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

namespace {

BranchSample fill_sample(const MatC& A, const VecR& z, const std::vector<double>& lam, const std::vector<VecC>& psi) {
  BranchSample s;
  s.z = z;
  s.lambda = lam;
  s.psi = psi;
  for (size_t i = 0; i < psi.size(); ++i) {
    s.residual = std::max(s.residual, (A * psi[i] - lam[i] * psi[i]).norm());
    s.imag_part = std::max(s.imag_part, std::abs(psi[i].dot(A * psi[i]).imag()));
  }
  return s;
}

}  // namespace

BranchResult track_branches(const MatrixSeries& s, double lambda0, int h, const std::vector<VecR>& samples) {
  s.validate();
  require(h >= 1 && h <= s.d, "multiplicity out of range");
  BranchResult r;
  r.lambda0 = lambda0;
  r.multiplicity = h;
  r.radius = series_radius(s);
  const VecR z0 = VecR::Zero(s.nvars);
  const MatC A0 = s.at(z0);
  VecR ev;
  MatC V;
  dense_spectrum(A0, ev, V);
  const double tol = 1e-10 * std::max(1.0, std::abs(lambda0));
  std::vector<int> cluster;
  for (int k = 0; k < s.d; ++k)
    if (std::abs(ev(k) - lambda0) <= tol) cluster.push_back(k);
  require(static_cast<int>(cluster.size()) == h,
          "lambda0 is not an eigenvalue of A(0) with the stated multiplicity (found " +
              std::to_string(cluster.size()) + ")");
  MatC Psi(s.d, h);
  for (int i = 0; i < h; ++i) Psi.col(i) = V.col(cluster[i]);
  std::vector<VecC> kernel;
  for (int i = 0; i < h; ++i) kernel.push_back(Psi.col(i));
  r.window = smallness_window(s, pseudo_inverse(A0, lambda0, kernel));

  for (const auto& z : samples) {
    require(z.size() == s.nvars, "sample point has the wrong number of variables");
    require(z.norm() < r.radius, "sample outside the series radius");
  }
  // Rotate a degenerate start to the basis that diagonalizes the first increment.
  if (h > 1) {
    auto first = std::find_if(samples.begin(), samples.end(), [](const VecR& z) { return z.norm() > 0; });
    if (first != samples.end()) {
      const MatC inc = Psi.adjoint() * (s.at(*first) - A0) * Psi;
      Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (inc + inc.adjoint()));
      Psi = Psi * es.eigenvectors();
    }
  }
  std::vector<VecC> prev;
  for (int i = 0; i < h; ++i) prev.push_back(Psi.col(i));
  VecR zprev = z0;
  std::vector<double> lprev(h, lambda0);
  for (const auto& z : samples) {
    const MatC A = s.at(z);
    dense_spectrum(A, ev, V);
    MatR w(h, s.d);
    for (int i = 0; i < h; ++i)
      for (int k = 0; k < s.d; ++k) w(i, k) = std::abs(prev[i].dot(V.col(k)));
    const std::vector<int> col = max_weight_assignment(w);
    std::vector<double> lam(h);
    std::vector<VecC> psi(h);
    double min_ov = 1.0;
    for (int i = 0; i < h; ++i) {
      VecC v = V.col(col[i]);
      const cxd ov = prev[i].dot(v);
      if (std::abs(ov) > 0) v *= std::conj(ov) / std::abs(ov);
      lam[i] = ev(col[i]);
      psi[i] = v;
      min_ov = std::min(min_ov, w(i, col[i]));
    }
    ensure(min_ov > 0.5, "branch tracking lost the cluster (merge with outside spectrum)");
    BranchSample bs = fill_sample(A, z, lam, psi);
    bs.min_overlap = min_ov;
    bs.in_window = z.norm() <= r.window;
    const double dz = (z - zprev).norm();
    if (dz > 0)
      for (int i = 0; i < h; ++i) r.lipschitz = std::max(r.lipschitz, std::abs(lam[i] - lprev[i]) / dz);
    r.samples.push_back(std::move(bs));
    prev = psi;
    lprev = lam;
    zprev = z;
  }
  return r;
}

std::vector<bool> isolation_check(const MatrixSeries& s, BranchResult& r, double d, double d_prime) {
  require(d_prime > 0 && d_prime < d, "need 0 < d' < d");
  VecR ev;
  MatC V;
  dense_spectrum(s.at(VecR::Zero(s.nvars)), ev, V);
  const double tol = 1e-10 * std::max(1.0, std::abs(r.lambda0));
  int inside = 0;
  for (int k = 0; k < ev.size(); ++k) {
    if (std::abs(ev(k) - r.lambda0) < d) {
      require(std::abs(ev(k) - r.lambda0) <= tol, "spectrum of A(0) is not isolated in (lambda - d, lambda + d)");
      ++inside;
    }
  }
  require(inside == r.multiplicity, "multiplicity of lambda0 differs from the tracked branch count");
  r.isolation.clear();
  for (const auto& smp : r.samples) {
    dense_spectrum(s.at(smp.z), ev, V);
    std::vector<double> win;
    for (int k = 0; k < ev.size(); ++k)
      if (std::abs(ev(k) - r.lambda0) < d_prime) win.push_back(ev(k));
    std::vector<double> tracked = smp.lambda;
    std::sort(tracked.begin(), tracked.end());
    bool ok = win.size() == tracked.size();
    for (size_t i = 0; ok && i < win.size(); ++i) ok = std::abs(win[i] - tracked[i]) <= 1e-9;
    r.isolation.push_back(ok);
  }
  return r.isolation;
}

cxd feshbach_determinant(const MatrixSeries& s, const std::vector<VecC>& psi, double rho, const VecR& z) {
  const int d = s.d;
  const int h = static_cast<int>(psi.size());
  require(h >= 1, "eigenspace basis is empty");
  MatC K(d, h);
  for (int i = 0; i < h; ++i) K.col(i) = psi[i];
  // Orthonormal complement basis.
  Eigen::HouseholderQR<MatC> qr(K);
  const MatC Qfull = qr.householderQ() * MatC::Identity(d, d);
  const MatC C = Qfull.rightCols(d - h);
  const MatC A = s.at(z);
  MatC top = rho * MatC::Identity(h, h) - K.adjoint() * A * K;
  if (d > h) {
    const MatC Aqq = C.adjoint() * A * C - rho * MatC::Identity(d - h, d - h);
    const MatC Aqp = C.adjoint() * A * K;
    Eigen::FullPivLU<MatC> lu(Aqq);
    ensure(lu.isInvertible(), "complement block is singular at rho");
    top += Aqp.adjoint() * lu.solve(Aqp);
  }
  return top.determinant();
}

void write_branch_csv(std::ostream& os, const BranchResult& r) {
  os << std::setprecision(17);
  const int nv = r.samples.empty() ? 1 : static_cast<int>(r.samples.front().z.size());
  for (int v = 0; v < nv; ++v) os << "z" << v << ",";
  os << "branch,lambda,isolation\n";
  for (size_t j = 0; j < r.samples.size(); ++j) {
    const auto& s = r.samples[j];
    const bool iso = j < r.isolation.size() ? static_cast<bool>(r.isolation[j]) : s.in_window;
    for (size_t i = 0; i < s.lambda.size(); ++i) {
      for (int v = 0; v < nv; ++v) os << s.z(v) << ",";
      os << i << "," << s.lambda[i] << "," << (iso ? 1 : 0) << "\n";
    }
  }
}

}  // namespace bwh
