#include "bwh/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace bwh {

double BlochMatrix::hermitian_defect() const {
  double nh = H.norm();
  return nh > 0 ? (H - H.adjoint()).norm() / nh : 0.0;
}

namespace {

void check_theta(const VecR& theta, int n) {
  require(theta.size() == n, "theta has dimension " + std::to_string(theta.size()) +
                                 ", expected " + std::to_string(n));
}

void check_medium_lattice(const CellMedium& medium, const FourierLattice& lat) {
  require(medium.dim == lat.dim, "lattice mismatch: medium dim " + std::to_string(medium.dim) +
                                     " vs lattice dim " + std::to_string(lat.dim));
}

std::vector<VecR> lattice_kappa(const FourierLattice& lat) {
  std::vector<VecR> k(lat.dim, VecR(lat.flat_size()));
  for (int a = 0; a < lat.dim; ++a)
    for (int i = 0; i < lat.flat_size(); ++i) k[a](i) = lat.kappa(i, a);
  return k;
}

DiffField diff_from_medium(const PeriodicField& f, const FourierLattice& lat) {
  DiffIndex di(lat);
  DiffField d;
  d.c.resize(di.size());
  for (int i = 0; i < di.size(); ++i) d.c[i] = f.coeff_at(di.multi(i), lat.period);
  return d;
}

std::vector<cxd> to_complex(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

BlochMatrix assemble_periodic(const CellMedium& medium, const VecR& theta, const FourierLattice& lat) {
  check_medium_lattice(medium, lat);
  const int n = medium.adim;
  require(n == lat.dim, "periodic assembly needs adim == dim");
  check_theta(theta, n);
  const int F = lat.flat_size();
  std::vector<std::vector<int>> modes(F);
  for (int i = 0; i < F; ++i) modes[i] = lat.multi(i);
  BlochMatrix b{lat, theta, MatC::Zero(F, F), MatC()};
  std::vector<int> diff(lat.dim);
  for (int r = 0; r < F; ++r) {
    for (int c = 0; c < F; ++c) {
      for (int a = 0; a < lat.dim; ++a) diff[a] = modes[r][a] - modes[c][a];
      cxd s = 0.0;
      for (int k = 0; k < n; ++k) {
        double wr = static_cast<double>(modes[r][k]) / lat.period + theta(k);
        for (int l = 0; l < n; ++l) {
          cxd akl = medium.a(k, l).coeff_at(diff, lat.period);
          if (akl == 0.0) continue;
          double wc = static_cast<double>(modes[c][l]) / lat.period + theta(l);
          s += wr * akl * wc;
        }
      }
      b.H(r, c) = kFourPi2 * s + medium.V.coeff_at(diff, lat.period);
    }
  }
  return b;
}

BlochMatrix dtheta_operator(const CellMedium& medium, const VecR& theta, const FourierLattice& lat, int k) {
  check_medium_lattice(medium, lat);
  const int n = medium.adim;
  check_theta(theta, n);
  require(k >= 0 && k < n, "axis " + std::to_string(k) + " out of range");
  const int F = lat.flat_size();
  std::vector<std::vector<int>> modes(F);
  for (int i = 0; i < F; ++i) modes[i] = lat.multi(i);
  BlochMatrix b{lat, theta, MatC::Zero(F, F), MatC()};
  std::vector<int> diff(lat.dim);
  for (int r = 0; r < F; ++r) {
    for (int c = 0; c < F; ++c) {
      for (int a = 0; a < lat.dim; ++a) diff[a] = modes[r][a] - modes[c][a];
      cxd s = 0.0;
      for (int j = 0; j < n; ++j) {
        double wc = static_cast<double>(modes[c][j]) / lat.period + theta(j);
        double wr = static_cast<double>(modes[r][j]) / lat.period + theta(j);
        s += medium.a(k, j).coeff_at(diff, lat.period) * wc;
        s += wr * medium.a(j, k).coeff_at(diff, lat.period);
      }
      b.H(r, c) = kFourPi2 * s;
    }
  }
  return b;
}

MatC CellForm::toeplitz(const DiffField& f) const {
  const int F = size();
  MatC T = MatC::Zero(F, F);
  if (f.empty()) return T;
  DiffIndex di(lat);
  for (int r = 0; r < F; ++r)
    for (int c = 0; c < F; ++c) T(r, c) = f.c[di.of(r, c)];
  return T;
}

VecC CellForm::apply(const DiffField& f, const VecC& x) const {
  const int F = size();
  VecC y = VecC::Zero(F);
  if (f.empty()) return y;
  DiffIndex di(lat);
  for (int r = 0; r < F; ++r) {
    cxd s = 0.0;
    for (int c = 0; c < F; ++c) s += f.c[di.of(r, c)] * x(c);
    y(r) = s;
  }
  return y;
}

cxd CellForm::pair(const DiffField& f, const VecC& g, const VecC& x) const {
  return g.dot(apply(f, x));
}

VecC CellForm::grad(const VecC& x, int a) const {
  return (kI * kTwoPi) * kappa[a].cast<cxd>().cwiseProduct(x);
}

MatC CellForm::stiffness(const VecR& theta) const {
  check_theta(theta, n);
  const int F = size();
  DiffIndex di(lat);
  MatC H(F, F);
  for (int r = 0; r < F; ++r) {
    for (int c = 0; c < F; ++c) {
      const int d = di.of(r, c);
      cxd s = 0.0;
      for (int a = 0; a < n; ++a) {
        const double ka = kappa[a](r);
        for (int b = 0; b < n; ++b) {
          const double kb = kappa[b](c);
          s += ka * K[a * n + b].c[d] * kb;
          s += theta(a) * L[a * n + b].c[d] * kb;
          s += kappa[b](r) * L[a * n + b].c[d] * theta(a);
          s += theta(a) * theta(b) * AJ[a * n + b].c[d];
        }
      }
      H(r, c) = kFourPi2 * s + (VJ.empty() ? cxd(0.0) : VJ.c[d]);
    }
  }
  return H;
}

MatC CellForm::mass() const {
  return has_mass() ? toeplitz(J) : MatC::Identity(size(), size());
}

MatC CellForm::dtheta(const VecR& theta, int k) const {
  check_theta(theta, n);
  require(k >= 0 && k < n, "axis " + std::to_string(k) + " out of range");
  const int F = size();
  DiffIndex di(lat);
  MatC D(F, F);
  for (int r = 0; r < F; ++r) {
    for (int c = 0; c < F; ++c) {
      const int d = di.of(r, c);
      cxd s = 0.0;
      for (int b = 0; b < n; ++b) {
        s += L[k * n + b].c[d] * kappa[b](c);
        s += kappa[b](r) * L[k * n + b].c[d];
        s += theta(b) * (AJ[k * n + b].c[d] + AJ[b * n + k].c[d]);
      }
      D(r, c) = kFourPi2 * s;
    }
  }
  return D;
}

MatC CellForm::dtheta2(int k, int l) const {
  require(k >= 0 && k < n && l >= 0 && l < n, "axis out of range");
  MatC T = toeplitz(AJ[k * n + l]) + toeplitz(AJ[l * n + k]);
  return kFourPi2 * T;
}

BlochMatrix CellForm::bloch(const VecR& theta) const {
  BlochMatrix b{lat, theta, stiffness(theta), MatC()};
  if (has_mass()) b.M = toeplitz(J);
  return b;
}

CellForm form_from_medium(const CellMedium& medium, const FourierLattice& lat) {
  check_medium_lattice(medium, lat);
  require(medium.adim == lat.dim, "periodic form needs adim == dim");
  CellForm f;
  f.lat = lat;
  f.n = medium.adim;
  f.kappa = lattice_kappa(lat);
  for (const auto& a : medium.A) f.K.push_back(diff_from_medium(a, lat));
  f.L = f.K;
  f.AJ = f.K;
  f.VJ = diff_from_medium(medium.V, lat);
  f.UJ = diff_from_medium(medium.U, lat);
  return f;
}

namespace {

// Build a form from pointwise K, L, AJ, VJ, UJ, J samples.
CellForm form_from_raw(const FourierLattice& lat, const std::vector<VecR>& kappa, const SampleGrid& g,
                       int n, const std::vector<std::vector<double>>& Ks,
                       const std::vector<std::vector<double>>& Ls,
                       const std::vector<std::vector<double>>& AJs, const std::vector<double>& VJs,
                       const std::vector<double>& UJs, const std::vector<double>& Js) {
  CellForm f;
  f.lat = lat;
  f.n = n;
  f.kappa = kappa;
  auto df = [&](const std::vector<double>& v) {
    return v.empty() ? DiffField{} : diff_from_samples(lat, g, to_complex(v));
  };
  for (int c = 0; c < n * n; ++c) {
    f.K.push_back(df(Ks[c]));
    f.L.push_back(df(Ls[c]));
    f.AJ.push_back(df(AJs[c]));
  }
  f.VJ = df(VJs);
  f.UJ = df(UJs);
  f.J = df(Js);
  return f;
}

}  // namespace

CellForm form_from_samples(const FourierLattice& lat, const std::vector<VecR>& kappa,
                           const SampledFields& s) {
  const int n = s.n;
  const int P = s.grid.size();
  require(static_cast<int>(s.A.size()) == n * n, "sampled A must have n*n components");
  std::vector<std::vector<double>> Ks(n * n, std::vector<double>(P)), Ls = Ks, AJs = Ks;
  std::vector<double> VJs(P), UJs(P), Js;
  if (!s.J.empty()) Js = s.J;
  MatR A(n, n), R(n, n);
  for (int p = 0; p < P; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        A(i, j) = s.A[i * n + j][p];
        R(i, j) = s.R.empty() ? (i == j ? 1.0 : 0.0) : s.R[i * n + j][p];
      }
    const double Jp = s.J.empty() ? 1.0 : s.J[p];
    MatR AR = A * R;
    MatR K = R.transpose() * AR;
    for (int c = 0; c < n * n; ++c) {
      Ks[c][p] = K(c / n, c % n) * Jp;
      Ls[c][p] = AR(c / n, c % n) * Jp;
      AJs[c][p] = A(c / n, c % n) * Jp;
    }
    VJs[p] = (s.V.empty() ? 0.0 : s.V[p]) * Jp;
    UJs[p] = (s.U.empty() ? 0.0 : s.U[p]) * Jp;
  }
  return form_from_raw(lat, kappa, s.grid, n, Ks, Ls, AJs, VJs, UJs, Js);
}

int default_cell_grid(int cutoff, const CellMedium& medium) {
  int mc = medium.cutoff();
  for (const auto& a : medium.A) mc = std::max(mc, a.lat.cutoff);
  return fft_friendly(std::max({8 * cutoff + 2, 2 * cutoff + 2 * mc + 2, 32}));
}

namespace {

std::vector<double> real_part(const std::vector<cxd>& v) {
  std::vector<double> r(v.size());
  for (size_t i = 0; i < v.size(); ++i) r[i] = v[i].real();
  return r;
}

SampledFields sample_medium(const CellMedium& medium, const SampleGrid& g) {
  SampledFields s;
  s.grid = g;
  s.n = medium.adim;
  for (const auto& a : medium.A) s.A.push_back(real_part(a.sample(g)));
  s.V = real_part(medium.V.sample(g));
  s.U = real_part(medium.U.sample(g));
  return s;
}

}  // namespace

CellForm deformed_form(const CellMedium& medium, const Displacement& z, double eta,
                       const FourierLattice& lat, const DeformedOptions& opt) {
  check_medium_lattice(medium, lat);
  const int n = medium.adim;
  require(n == lat.dim && z.dim() == n, "deformation dimension mismatch");
  require(eta >= 0.0 && eta < 1.0, "eta outside the validity window [0, 1)");
  require(z.period() >= 1, "deformation is not periodic; a supercell needs a cyclic realization");
  require(lat.period % z.period() == 0,
          "supercell period must be a multiple of the deformation period");
  const int cell_cutoff = (lat.cutoff + lat.period - 1) / lat.period;
  const int q = opt.cell_q > 0 ? opt.cell_q : default_cell_grid(cell_cutoff, medium);
  SampleGrid g{lat.dim, q * lat.period, static_cast<double>(lat.period)};
  SampledFields s = sample_medium(medium, g);
  const int P = g.size();
  s.R.assign(n * n, std::vector<double>(P));
  s.J.resize(P);
  VecR zv(n);
  MatR gz(n, n);
  double nu = 1e300;
  for (int p = 0; p < P; ++p) {
    z.eval(g.point(p), zv, gz);
    MatR F = MatR::Identity(n, n) + eta * gz;
    double J = F.determinant();
    nu = std::min(nu, J);
    MatR R = F.inverse().transpose();
    for (int c = 0; c < n * n; ++c) s.R[c][p] = R(c / n, c % n);
    s.J[p] = J;
  }
  if (nu < opt.nu_floor)
    throw ConfigError("degenerate deformation: min det(grad Phi) = " + std::to_string(nu) +
                      " below nu = " + std::to_string(opt.nu_floor));
  return form_from_samples(lat, lattice_kappa(lat), s);
}

BlochMatrix assemble_supercell_deformed(const CellMedium& medium, const Displacement& z, double eta,
                                        const VecR& theta, const FourierLattice& lat,
                                        const DeformedOptions& opt) {
  return deformed_form(medium, z, eta, lat, opt).bloch(theta);
}

CellForm first_order_form(const CellMedium& medium, const FourierLattice& lat, const SampleGrid& g,
                          const std::vector<std::vector<double>>& EgradZ) {
  check_medium_lattice(medium, lat);
  const int n = medium.adim;
  require(static_cast<int>(EgradZ.size()) == n * n, "EgradZ must have n*n components");
  require(lat.period == 1 && std::abs(g.period - 1.0) < 1e-12, "first-order form lives on the unit cell");
  SampledFields s = sample_medium(medium, g);
  const int P = g.size();
  std::vector<std::vector<double>> Ks(n * n, std::vector<double>(P)), Ls = Ks, AJs = Ks;
  std::vector<double> VJs(P), UJs(P), Js(P);
  MatR A(n, n), G(n, n);
  for (int p = 0; p < P; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        A(i, j) = s.A[i * n + j][p];
        G(i, j) = EgradZ[i * n + j][p];
      }
    const double tr = G.trace();
    MatR K1 = -G * A - A * G.transpose() + tr * A;
    MatR L1 = -A * G.transpose() + tr * A;
    for (int c = 0; c < n * n; ++c) {
      Ks[c][p] = K1(c / n, c % n);
      Ls[c][p] = L1(c / n, c % n);
      AJs[c][p] = tr * A(c / n, c % n);
    }
    VJs[p] = tr * s.V[p];
    UJs[p] = tr * s.U[p];
    Js[p] = tr;
  }
  return form_from_raw(lat, lattice_kappa(lat), g, n, Ks, Ls, AJs, VJs, UJs, Js);
}

CellForm quasiperiodic_form(const QuasiPeriodicSpec& spec, const CellMedium& medium_m,
                            const FourierLattice& lat) {
  const int m = spec.m;
  const int n = static_cast<int>(spec.Lambda.cols());
  require(spec.Lambda.rows() == m, "frequency matrix must have m rows");
  require(medium_m.dim == m && lat.dim == m, "quasi-periodic medium must live on the m-torus");
  require(medium_m.adim == n, "quasi-periodic medium tensor size must equal n");
  require(lat.period == 1, "quasi-periodic lattice has period 1");
  auto chk = check_frequency_matrix(spec.Lambda, 1.0, 4);
  if (!chk.independent) throw ConfigError("invalid frequency matrix: rows are integer-dependent");
  std::vector<VecR> kappa(n, VecR(lat.flat_size()));
  for (int i = 0; i < lat.flat_size(); ++i) {
    auto k = lat.multi(i);
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int r = 0; r < m; ++r) s += spec.Lambda(r, a) * k[r];
      kappa[a](i) = s;
    }
  }
  if (spec.Bper.empty()) {
    CellForm f;
    f.lat = lat;
    f.n = n;
    f.kappa = kappa;
    for (const auto& a : medium_m.A) f.K.push_back(diff_from_medium(a, lat));
    f.L = f.K;
    f.AJ = f.K;
    f.VJ = diff_from_medium(medium_m.V, lat);
    f.UJ = diff_from_medium(medium_m.U, lat);
    return f;
  }
  require(static_cast<int>(spec.Bper.size()) == n * n, "B_per must have n*n components");
  int mc = medium_m.cutoff();
  for (const auto& b : spec.Bper) mc = std::max(mc, b.lat.cutoff);
  SampleGrid g{m, fft_friendly(std::max({8 * lat.cutoff + 2, 2 * lat.cutoff + 2 * mc + 2, 32})), 1.0};
  SampledFields s = sample_medium(medium_m, g);
  const int P = g.size();
  std::vector<std::vector<double>> B(n * n);
  for (int c = 0; c < n * n; ++c) B[c] = real_part(spec.Bper[c].sample(g));
  s.R.assign(n * n, std::vector<double>(P));
  s.J.resize(P);
  MatR Bp(n, n);
  for (int p = 0; p < P; ++p) {
    for (int c = 0; c < n * n; ++c) Bp(c / n, c % n) = B[c][p];
    double det = Bp.determinant();
    require(std::abs(det) > 1e-12, "B_per is singular on the sampling grid");
    MatR R = Bp.inverse().transpose();
    for (int c = 0; c < n * n; ++c) s.R[c][p] = R(c / n, c % n);
    s.J[p] = std::abs(det);
  }
  return form_from_samples(lat, kappa, s);
}

BlochMatrix assemble_quasiperiodic(const QuasiPeriodicSpec& spec, const CellMedium& medium_m,
                                   const VecR& theta, const FourierLattice& lat) {
  return quasiperiodic_form(spec, medium_m, lat).bloch(theta);
}

FrequencyCheck check_frequency_matrix(const MatR& Lambda, double d, int search_radius) {
  require(d > 0.0, "bound d must be positive");
  require(search_radius >= 1, "search radius must be >= 1");
  const int m = static_cast<int>(Lambda.rows());
  FrequencyCheck out;
  MatR B = Lambda * Lambda.transpose();
  out.gram_det = B.determinant();
  const double scale = std::pow(std::max(B.norm(), 1e-300), m);
  out.positive = out.gram_det > 1e-12 * scale;
  if (out.positive) {
    double binv = B.inverse().operatorNorm();
    out.radius_needed = binv * Lambda.operatorNorm() * d;
  }
  // Enumerate k in Z^m with |k|_inf <= radius.
  std::vector<int> k(m, -search_radius);
  bool boundary_hit = false;
  const double tiny = 1e-10 * std::max(1.0, Lambda.norm());
  while (true) {
    bool nonzero = std::any_of(k.begin(), k.end(), [](int v) { return v != 0; });
    if (nonzero) {
      VecR kv(m);
      for (int i = 0; i < m; ++i) kv(i) = k[i];
      double len = (Lambda.transpose() * kv).norm();
      if (len <= tiny) out.independent = false;
      if (len <= d) {
        out.witnesses.push_back(k);
        int kmax = 0;
        for (int v : k) kmax = std::max(kmax, std::abs(v));
        if (kmax == search_radius) boundary_hit = true;
      }
    }
    int i = m - 1;
    while (i >= 0 && k[i] == search_radius) k[i--] = -search_radius;
    if (i < 0) break;
    ++k[i];
  }
  if (!out.independent) {
    out.finite_set = Finiteness::no;  // integer multiples of a null relation
  } else if (out.positive && out.radius_needed <= search_radius) {
    out.finite_set = Finiteness::yes;
  } else {
    out.finite_set = boundary_hit ? Finiteness::inconclusive
                                  : (out.positive ? Finiteness::yes : Finiteness::inconclusive);
  }
  return out;
}

}  // namespace bwh
