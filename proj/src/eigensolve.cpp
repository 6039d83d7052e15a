#include "bwh/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace bwh {

namespace {

void fix_phase(VecC& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  // Ties within roundoff go to the first index.
  const double top = std::abs(v(imax));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > top * (1.0 - 1e-10)) {
      imax = i;
      break;
    }
  const cxd ph = std::abs(v(imax)) > 0 ? std::conj(v(imax)) / std::abs(v(imax)) : cxd(1.0);
  v *= ph;
}

struct Eig {
  VecR values;
  MatC vectors;
};

Eig dense_eig(const BlochMatrix& m, bool vectors) {
  const MatC H = 0.5 * (m.H + m.H.adjoint());
  const int opts = vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  if (!m.has_mass()) {
    Eigen::SelfAdjointEigenSolver<MatC> es(H, opts);
    ensure(es.info() == Eigen::Success, "dense Hermitian eigensolver did not converge");
    return {es.eigenvalues(), vectors ? MatC(es.eigenvectors()) : MatC()};
  }
  const MatC M = 0.5 * (m.M + m.M.adjoint());
  Eigen::LLT<MatC> llt(M);
  ensure(llt.info() == Eigen::Success, "mass matrix is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(H, M, opts | Eigen::Ax_lBx);
  ensure(es.info() == Eigen::Success, "generalized Hermitian eigensolver did not converge");
  return {es.eigenvalues(), vectors ? MatC(es.eigenvectors()) : MatC()};
}

// Block shift-invert subspace iteration with Rayleigh-Ritz for large matrices.
Eig shift_invert(const BlochMatrix& m, int count, const EigenOptions& opt) {
  const int F = static_cast<int>(m.H.rows());
  const MatC M = m.has_mass() ? m.M : MatC::Identity(F, F);
  const int block = std::min(F, count + std::max(8, count));
  // Lower Gershgorin bound of H and of M give a shift below the spectrum.
  double gh = 1e300, gm = 1e300;
  for (int i = 0; i < F; ++i) {
    gh = std::min(gh, m.H(i, i).real() - (m.H.row(i).cwiseAbs().sum() - std::abs(m.H(i, i))));
    gm = std::min(gm, M(i, i).real() - (M.row(i).cwiseAbs().sum() - std::abs(M(i, i))));
  }
  ensure(gm > 0, "shift-invert path needs a diagonally dominant mass matrix");
  double sigma = gh < 0 ? gh / gm - 1.0 : -1.0;
  Eigen::PartialPivLU<MatC> lu(m.H - sigma * M);
  MatC X = MatC::Zero(F, block);
  for (int j = 0; j < block; ++j) X(j * (F / block), j) = 1.0;
  for (int j = 0; j < block; ++j) X(j, j) += 0.5;
  VecR ritz;
  MatC Y;
  bool refreshed = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    X = lu.solve(M * X);
    Eigen::HouseholderQR<MatC> qr(X);
    X = qr.householderQ() * MatC::Identity(F, block);
    MatC Hs = X.adjoint() * m.H * X;
    MatC Ms = X.adjoint() * M * X;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(0.5 * (Hs + Hs.adjoint()), 0.5 * (Ms + Ms.adjoint()));
    ritz = es.eigenvalues();
    Y = X * es.eigenvectors();
    double worst = 0.0;
    const double hn = m.H.cwiseAbs().rowwise().sum().maxCoeff();
    for (int j = 0; j < count; ++j)
      worst = std::max(worst, (m.H * Y.col(j) - ritz(j) * (M * Y.col(j))).norm() / hn);
    if (worst < 1e-13) return {ritz.head(count), Y.leftCols(count)};
    if (!refreshed && it >= 3) {
      sigma = ritz(0) - 0.1 * std::max(1.0, std::abs(ritz(count - 1) - ritz(0)));
      lu.compute(m.H - sigma * M);
      refreshed = true;
    }
    X = Y;
  }
  throw NumericalError("shift-invert iteration did not converge within " +
                       std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace

std::vector<BandPoint> lowest_bands(const BlochMatrix& m, int count, const EigenOptions& opt) {
  const int F = static_cast<int>(m.H.rows());
  require(count >= 1 && count <= F, "requested band count exceeds the lattice size");
  Eig e = F <= opt.dense_limit ? dense_eig(m, true) : shift_invert(m, count, opt);
  const MatC M = m.has_mass() ? m.M : MatC();
  std::vector<BandPoint> out;
  for (int j = 0; j < count; ++j) {
    BandPoint b;
    b.theta = m.theta;
    b.band = j;
    b.lambda = e.values(j);
    b.psi = e.vectors.col(j);
    double nrm = m.has_mass() ? std::sqrt(b.psi.dot(M * b.psi).real()) : b.psi.norm();
    b.psi /= nrm;
    fix_phase(b.psi);
    VecC r = m.H * b.psi - b.lambda * (m.has_mass() ? VecC(M * b.psi) : b.psi);
    b.residual = r.norm();
    out.push_back(std::move(b));
  }
  return out;
}

VecR all_eigenvalues(const BlochMatrix& m) { return dense_eig(m, false).values; }

int multiplicity(const BlochMatrix& m, double lambda, double tol) {
  VecR ev = all_eigenvalues(m);
  int h = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i) - lambda) <= tol) ++h;
  return h;
}

GridSpec GridSpec::uniform(int dim, double lo, double hi, int nodes) {
  require(nodes >= 1, "grid needs at least one node");
  GridSpec g;
  std::vector<double> ax(nodes);
  for (int i = 0; i < nodes; ++i) ax[i] = nodes == 1 ? lo : lo + (hi - lo) * i / (nodes - 1);
  g.axes.assign(dim, ax);
  return g;
}

int GridSpec::size() const {
  int s = 1;
  for (const auto& a : axes) s *= static_cast<int>(a.size());
  return s;
}

VecR GridSpec::node(int idx) const {
  VecR t(axes.size());
  for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
    const int s = static_cast<int>(axes[a].size());
    t(a) = axes[a][idx % s];
    idx /= s;
  }
  return t;
}

BandSurface band_surface(const BlochBuilder& build, const std::vector<int>& bands, const GridSpec& grid,
                         double crossing_tol) {
  require(!bands.empty(), "band list is empty");
  for (const auto& ax : grid.axes)
    for (double t : ax) require(t >= -0.5 && t <= 0.5, "band-surface grid must lie in the reduced cell");
  BandSurface s;
  s.grid = grid;
  s.bands = bands;
  const int top = *std::max_element(bands.begin(), bands.end());
  for (int i = 0; i < grid.size(); ++i) {
    BlochMatrix m = build(grid.node(i));
    VecR ev = all_eigenvalues(m);
    require(top + 1 < ev.size(), "band index exceeds lattice size");
    std::vector<double> row;
    for (int b : bands) row.push_back(ev(b));
    s.lambda.push_back(row);
    double gap = ev(bands[0] + 1) - ev(bands[0]);
    if (bands[0] > 0) gap = std::min(gap, ev(bands[0]) - ev(bands[0] - 1));
    s.gap.push_back(gap);
    if (gap < crossing_tol) s.crossings.push_back(i);
  }
  // Lipschitz estimate along each axis between neighbouring nodes.
  for (int i = 0; i < grid.size(); ++i) {
    VecR ti = grid.node(i);
    for (int j = i + 1; j < grid.size(); ++j) {
      VecR tj = grid.node(j);
      double dist = (ti - tj).norm();
      if (dist <= 0) continue;
      int diffs = 0;
      for (int a = 0; a < ti.size(); ++a)
        if (ti(a) != tj(a)) ++diffs;
      if (diffs != 1) continue;
      for (size_t b = 0; b < bands.size(); ++b)
        s.lipschitz = std::max(s.lipschitz, std::abs(s.lambda[i][b] - s.lambda[j][b]) / dist);
    }
  }
  return s;
}

void write_band_csv(std::ostream& os, const BandSurface& s) {
  const int n = static_cast<int>(s.grid.axes.size());
  for (int a = 0; a < n; ++a) os << "theta_" << (a + 1) << ",";
  os << "band,lambda\n";
  os.precision(17);
  for (int i = 0; i < s.grid.size(); ++i) {
    VecR t = s.grid.node(i);
    for (size_t b = 0; b < s.bands.size(); ++b) {
      for (int a = 0; a < n; ++a) os << t(a) << ",";
      os << s.bands[b] << "," << s.lambda[i][b] << "\n";
    }
  }
}

}  // namespace bwh
