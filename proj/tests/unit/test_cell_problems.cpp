#include <cmath>

#include "doctest.h"

#include "bwh/cell_problems.hpp"
#include "bwh/effective.hpp"
#include "bwh/stochastic.hpp"

using namespace bwh;

namespace {

VecR th1(double t) {
  VecR v(1);
  v << t;
  return v;
}

GradientStats constant_stats(int n, const MatR& G, int q = 32) {
  GradientStats s;
  s.grid = SampleGrid{n, q, 1.0};
  s.n = n;
  s.EgradZ.assign(n * n, std::vector<double>(s.grid.size()));
  s.EdivZ.assign(s.grid.size(), G.trace());
  for (int c = 0; c < n * n; ++c)
    for (auto& v : s.EgradZ[c]) v = G(c / n, c % n);
  return s;
}

}  // namespace

TEST_CASE("constrained solve follows the Fredholm alternative") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 10);
  BlochMatrix b = assemble_periodic(m, th1(0.1), lat);
  BandPoint p = lowest_bands(b, 1)[0];
  CHECK_THROWS_AS(constrained_solve(b, p.lambda, {p.psi}, p.psi), NumericalError);
  VecC u = constrained_solve(b, p.lambda, {p.psi}, VecC::Zero(lat.flat_size()));
  CHECK(u.norm() == 0.0);
  VecC rhs = VecC::Random(lat.flat_size());
  rhs -= p.psi * p.psi.dot(rhs);
  u = constrained_solve(b, p.lambda, {p.psi}, rhs);
  CHECK(((b.H - p.lambda * MatC::Identity(lat.flat_size(), lat.flat_size())) * u - rhs).norm() <= 1e-9 * rhs.norm());
  CHECK(std::abs(p.psi.dot(u)) <= 1e-12);
}

TEST_CASE("free constrained solve inverts the diagonal") {
  FourierLattice lat = build_lattice(1, 4);
  const double t = 0.2;
  BlochMatrix b = assemble_periodic(free_medium(1, 2), th1(t), lat);
  BandPoint p = lowest_bands(b, 1)[0];
  const int i = lat.flat({2});
  VecC e = VecC::Zero(lat.flat_size());
  e(i) = 1.0;
  VecC u = constrained_solve(b, p.lambda, {p.psi}, e);
  CHECK(std::abs(u(i) - 1.0 / (kFourPi2 * (2 + t) * (2 + t) - p.lambda)) < 1e-14);
  CHECK(std::abs(u.norm() - std::abs(u(i))) < 1e-14);
}

TEST_CASE("first auxiliary fields vanish for the free band 0") {
  FourierLattice lat = build_lattice(2, 3);
  CellMedium m = free_medium(2, 2);
  BandPoint p = lowest_bands(assemble_periodic(m, VecR::Zero(2), lat), 1)[0];
  AuxiliaryFields aux = first_auxiliary(m, lat, p);
  for (const auto& x : aux.xi) CHECK(x.norm() < 1e-12);
  CHECK(aux.grad_lambda.norm() < 1e-12);
}

TEST_CASE("first auxiliary field matches finite-differenced eigenvectors") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 16);
  const double h = 1e-4;
  auto state = [&](double t) { return lowest_bands(assemble_periodic(m, th1(t), lat), 1)[0]; };
  BandPoint p = state(0.0);
  AuxiliaryFields aux = first_auxiliary(m, lat, p);
  auto align = [&](VecC v) {
    const cxd o = p.psi.dot(v);
    return VecC(v * (std::conj(o) / std::abs(o)));
  };
  VecC fd = (align(state(h).psi) - align(state(-h).psi)) / (2 * h) / (kI * kTwoPi);
  CHECK((fd - aux.xi[0]).norm() < 1e-5);
  CHECK(std::abs(aux.gauge[0]) < 1e-10);
  CHECK(aux.residual < 1e-8);
}

TEST_CASE("solvability of the auxiliary equation holds away from critical points") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 12);
  BandPoint p = lowest_bands(assemble_periodic(m, th1(0.23), lat), 1)[0];
  AuxiliaryFields aux = first_auxiliary(m, lat, p);
  CHECK(aux.residual < 1e-8);
  CHECK(std::abs(aux.grad_lambda(0)) > 1.0);
}

TEST_CASE("second auxiliary Hessian identity") {
  SUBCASE("free medium gives 2 I") {
    CellMedium m = free_medium(2, 2);
    FourierLattice lat = build_lattice(2, 3);
    BandPoint p = lowest_bands(assemble_periodic(m, VecR::Zero(2), lat), 1)[0];
    MatR H = hessian_via_sac(m, lat, p, first_auxiliary(m, lat, p));
    CHECK((H - 2.0 * MatR::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("Mathieu matches the finite-difference Hessian") {
    CellMedium m = mathieu_medium(2, 2, 1.0);
    m.V.coeffs(m.V.lat.flat({1, 1})) += 0.3;
    m.V.coeffs(m.V.lat.flat({-1, -1})) += 0.3;
    FourierLattice lat = build_lattice(2, 8);
    CellForm f = form_from_medium(m, lat);
    BandPoint p = band_point(f, VecR::Zero(2), 0);
    MatR H = hessian_via_sac(m, lat, p, first_auxiliary(m, lat, p));
    MatR fd = fd_hessian(f, p.theta, 0, 1e-3) / kFourPi2;
    CHECK((H - fd).norm() <= 1e-5 * fd.norm());
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("non-critical points are rejected") {
    CellMedium m = mathieu_medium(1, 2, 1.0);
    FourierLattice lat = build_lattice(1, 8);
    BandPoint p = lowest_bands(assemble_periodic(m, th1(0.2), lat), 1)[0];
    CHECK_THROWS_AS(hessian_via_sac(m, lat, p, first_auxiliary(m, lat, p)), NumericalError);
  }
}

TEST_CASE("mean-zero gradient statistics give vanishing correctors") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 12);
  BandPoint p = lowest_bands(assemble_periodic(m, th1(0.0), lat), 1)[0];
  AuxiliaryFields aux = first_auxiliary(m, lat, p);
  CorrectorFields c = first_order_correctors(m, lat, p, aux, constant_stats(1, MatR::Zero(1, 1), default_cell_grid(12, m)));
  CHECK(c.lambda1 == 0.0);
  CHECK(c.theta1.norm() == 0.0);
  CHECK(c.psi1.norm() < 1e-14);
  CHECK(c.xi1[0].norm() < 1e-14);
}

TEST_CASE("dilation corrector matches the rescaled-medium oracle") {
  // A uniform dilation y -> (1 + eta b) y turns the cell problem into the
  // periodic one with A = (1 + eta b)^{-2}; differentiate that in eta.
  const double beta = 0.7, h = 1e-4;
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 16);
  BandPoint p = lowest_bands(assemble_periodic(m, th1(0.0), lat), 1)[0];
  CorrectorFields c = first_order_correctors(m, lat, p, first_auxiliary(m, lat, p),
                                             constant_stats(1, MatR::Constant(1, 1, beta), default_cell_grid(16, m)));
  auto lam = [&](double eta) {
    CellMedium s = m;
    s.A[0] = PeriodicField::constant(s.A[0].lat, std::pow(1 + eta * beta, -2));
    s.coercivity = 0.1;
    return lowest_bands(assemble_periodic(s, th1(0.0), lat), 1)[0].lambda;
  };
  const double oracle = (lam(h) - lam(-h)) / (2 * h);
  CHECK(std::abs(c.lambda1 - oracle) <= 1e-6);
  CHECK(std::abs(c.solvability) <= 1e-8);
}

TEST_CASE("sine deformation: lambda1 matches Richardson-extrapolated supercell slopes") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 16);
  BumpDisplacement z = deterministic_displacement(1, Profile::wave, 1.0);
  DeformationSpec spec = build_perturbed_identity(z, 0.01);
  CellForm f0 = form_from_medium(m, lat);
  BandPoint p = band_point(f0, th1(0.0), 0);
  CorrectorFields c = first_order_correctors(m, lat, p, first_auxiliary(f0, p), spec.stats);
  auto lam = [&](double eta) { return band_point(deformed_form(m, z, eta, lat), th1(0.0), 0).lambda; };
  const double d1 = (lam(1e-2) - p.lambda) / 1e-2;
  const double d2 = (lam(5e-3) - p.lambda) / 5e-3;
  const double oracle = 2 * d2 - d1;
  CHECK(std::abs(c.lambda1 - oracle) <= 1e-5 * std::max(std::abs(oracle), 1e-2));
}
