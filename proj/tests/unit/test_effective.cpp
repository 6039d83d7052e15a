#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"

#include "bwh/effective.hpp"
#include "bwh/stochastic.hpp"
#include "media.hpp"

using namespace bwh;

namespace {

VecR th1(double t) {
  VecR v(1);
  v << t;
  return v;
}

}  // namespace

TEST_CASE("critical point search") {
  SUBCASE("free medium converges to the origin") {
    CellMedium m = free_medium(1, 2);
    FourierLattice lat = build_lattice(1, 4);
    CriticalResult r = find_critical(m, lat, 0, th1(0.1));
    CHECK(std::abs(r.point.theta(0)) < 1e-10);
    CHECK(r.grad_norm < 1e-8);
  }
  SUBCASE("Mathieu band 0 converges to the origin") {
    CellMedium m = mathieu_medium(1, 2, 1.0);
    FourierLattice lat = build_lattice(1, 12);
    CriticalResult r = find_critical(m, lat, 0, th1(0.2));
    CHECK(std::abs(r.point.theta(0)) < 1e-9);
  }
  SUBCASE("symmetry points need no iterations") {
    CellMedium m = mathieu_medium(2, 2, 1.0);
    FourierLattice lat = build_lattice(2, 4);
    CriticalResult r = find_critical(m, lat, 0, VecR::Zero(2));
    CHECK(r.iterations == 0);
  }
}

TEST_CASE("free medium effective coefficients") {
  CellMedium m = free_medium(2, 2);
  m.U = PeriodicField::constant(m.U.lat, 0.0);
  m.U.coeffs(m.U.lat.flat({0, 0})) = 0.3;
  m.U.coeffs(m.U.lat.flat({1, 0})) = 0.2;
  m.U.coeffs(m.U.lat.flat({-1, 0})) = 0.2;
  FourierLattice lat = build_lattice(2, 3);
  BandPoint p = lowest_bands(assemble_periodic(m, VecR::Zero(2), lat), 1)[0];
  EffectiveCoefficients e = effective_coefficients(m, lat, p, first_auxiliary(m, lat, p));
  CHECK((e.B - MatC::Identity(2, 2)).norm() < 1e-12);
  CHECK((e.A_star - MatR::Identity(2, 2)).norm() < 1e-12);
  CHECK(std::abs(e.U_star - 0.3) < 1e-12);
}

TEST_CASE("effective tensor routes agree on a Mathieu cell") {
  CellMedium m = mathieu_medium(2, 2, 1.5);
  bwh::testing::add_real_mode(m.V, {1, 1}, cxd(0.4, 0.0));
  FourierLattice lat = build_lattice(2, 8);
  BandPoint p = find_critical(m, lat, 0, VecR::Zero(2)).point;
  EffectiveCoefficients e = effective_coefficients(m, lat, p, first_auxiliary(m, lat, p));
  CHECK(e.route_discrepancy <= 1e-4 * std::max(1.0, e.A_star.norm()));
  CHECK((e.A_star - e.A_sac).norm() <= 1e-9);
  CHECK((e.A_star - e.A_star.transpose()).norm() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<MatR> es(e.A_star);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  CHECK(e.B.imag().norm() <= 1e-10);
}

TEST_CASE("effective coefficients are invariant under a constant V shift") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 12);
  auto coeffs = [&](const CellMedium& med) {
    BandPoint p = lowest_bands(assemble_periodic(med, th1(0.0), lat), 1)[0];
    return std::make_pair(p.lambda, effective_coefficients(med, lat, p, first_auxiliary(med, lat, p)));
  };
  auto [l0, e0] = coeffs(m);
  auto [l1, e1] = coeffs(m.shifted_V(2.5));
  CHECK(std::abs(l1 - l0 - 2.5) < 1e-10);
  CHECK((e1.A_star - e0.A_star).norm() < 1e-10);
  CHECK(std::abs(e1.U_star - e0.U_star) < 1e-10);
}

TEST_CASE("first-order series") {
  CellMedium m = bwh::testing::asymmetric_medium();
  FourierLattice lat = build_lattice(1, 16);
  BumpDisplacement z = bwh::testing::cyclic_bump(1, Profile::sine, {0.3, 1.0});
  PerturbedIdentityOptions po;
  po.cutoff = 16;
  po.medium = &m;
  DeformationSpec spec = build_perturbed_identity(z, 0.02, po);
  CellForm f = form_from_medium(m, lat);
  BandPoint p = find_critical(f, 0, th1(0.0)).point;
  AuxiliaryFields aux = first_auxiliary(f, p);
  CorrectorFields corr = first_order_correctors(m, lat, p, aux, spec.stats);
  PerturbationSeries s = quasi_perfect_series(m, lat, p, aux, corr, spec.stats);

  SUBCASE("A1 is the symmetric part of B1") {
    CHECK((s.A1 - 0.5 * (s.B1 + s.B1.adjoint()).real()).norm() <= 1e-12);
    CHECK(std::abs(s.A1(0, 0)) > 1e-3);
  }
  SUBCASE("gauge freedom in psi1 does not change the series") {
    CorrectorFields c2 = first_order_correctors(m, lat, p, aux, spec.stats, cxd(0.6, 0.7));
    PerturbationSeries s2 = quasi_perfect_series(m, lat, p, aux, c2, spec.stats);
    CHECK((s2.A1 - s.A1).norm() <= 1e-8);
    CHECK(std::abs(s2.U1 - s.U1) <= 1e-8);
    CHECK(std::abs(s2.lambda1 - s.lambda1) <= 1e-12);
  }
  SUBCASE("supercell remainders decay quadratically") {
    OracleOptions oo;
    oo.cutoff = 16;
    OracleTable t = supercell_oracle(m, z, {0.0, 0.04, 0.02, 0.01}, 0, p.theta, s, oo);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].lambda_remainder <= 1e-10);
    CHECK(t.rows[0].A_remainder <= 1e-7);
    CHECK(t.slope_lambda >= 1.8);
    CHECK(t.slope_lambda <= 2.2);
    CHECK(t.slope_A >= 1.8);
    CHECK(t.slope_A <= 2.2);
  }
}

TEST_CASE("mean-zero statistics give vanishing first-order coefficients") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 12);
  CellForm f = form_from_medium(m, lat);
  BandPoint p = band_point(f, th1(0.0), 0);
  AuxiliaryFields aux = first_auxiliary(f, p);
  GradientStats st;
  st.grid = SampleGrid{1, default_cell_grid(12, m), 1.0};
  st.n = 1;
  st.EgradZ.assign(1, std::vector<double>(st.grid.size(), 0.0));
  st.EdivZ.assign(st.grid.size(), 0.0);
  CorrectorFields c = first_order_correctors(m, lat, p, aux, st);
  PerturbationSeries s = quasi_perfect_series(m, lat, p, aux, c, st);
  CHECK(s.A1.norm() < 1e-14);
  CHECK(std::abs(s.U1) < 1e-14);
  CHECK(std::abs(s.lambda1) < 1e-14);
}

TEST_CASE("log-log slope") {
  std::vector<double> x{0.1, 0.05, 0.025}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  CHECK(std::abs(loglog_slope(x, y) - 2.0) < 1e-12);
}
