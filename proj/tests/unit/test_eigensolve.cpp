#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "doctest.h"

#include "bwh/eigensolve.hpp"
#include "bwh/stochastic.hpp"

using namespace bwh;

namespace {

VecR th1(double t) {
  VecR v(1);
  v << t;
  return v;
}

}  // namespace

TEST_CASE("free bands at theta = 0") {
  auto b = lowest_bands(assemble_periodic(free_medium(1, 2), th1(0.0), build_lattice(1, 6)), 4);
  const double ref[4] = {0.0, kFourPi2, kFourPi2, 4 * kFourPi2};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(b[i].lambda - ref[i]) < 1e-10);
}

TEST_CASE("Mathieu ground state at N=32 equals the N=128 dense oracle") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  const double lam = lowest_bands(assemble_periodic(m, th1(0.0), build_lattice(1, 32)), 1)[0].lambda;
  const double oracle = all_eigenvalues(assemble_periodic(m, th1(0.0), build_lattice(1, 128)))(0);
  CHECK(std::abs(lam - oracle) <= 1e-10);
}

TEST_CASE("returned pairs are M-orthonormal with small residuals") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  BumpDisplacement z = deterministic_displacement(1, Profile::wave, 1.0);
  BlochMatrix b = assemble_supercell_deformed(m, z, 0.1, th1(0.2), build_lattice(1, 10));
  REQUIRE(b.has_mass());
  auto bands = lowest_bands(b, 5);
  const double hn = b.H.norm();
  for (size_t i = 0; i < bands.size(); ++i) {
    CHECK((b.H * bands[i].psi - bands[i].lambda * (b.M * bands[i].psi)).norm() <= 1e-9 * hn);
    CHECK(std::abs(bands[i].psi.dot(b.H * bands[i].psi).imag()) <= 1e-12 * hn);
    for (size_t j = 0; j < bands.size(); ++j) {
      const cxd g = bands[i].psi.dot(b.M * bands[j].psi);
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("generalized spectrum matches a brute-force Cholesky reduction") {
  CellMedium m = mathieu_medium(1, 2, 2.0);
  BumpDisplacement z = deterministic_displacement(1, Profile::wave, 1.0);
  BlochMatrix b = assemble_supercell_deformed(m, z, 0.15, th1(0.3), build_lattice(1, 12));
  Eigen::LLT<MatC> llt(b.M);
  MatC Li = llt.matrixL().solve(MatC::Identity(b.M.rows(), b.M.cols()));
  MatC S = Li * b.H * Li.adjoint();
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (S + S.adjoint()));
  VecR ours = all_eigenvalues(b);
  for (int i = 0; i < ours.size(); ++i)
    CHECK(std::abs(ours(i) - es.eigenvalues()(i)) <= 1e-10 * std::max(1.0, std::abs(ours(i))));
}

TEST_CASE("free band surface on three nodes") {
  CellMedium m = free_medium(1, 2);
  FourierLattice lat = build_lattice(1, 4);
  BlochBuilder build = [&](const VecR& t) { return assemble_periodic(m, t, lat); };
  BandSurface s = band_surface(build, {0}, GridSpec::uniform(1, -0.25, 0.25, 3));
  CHECK(std::abs(s.lambda[0][0] - kPi * kPi / 4) < 1e-10);
  CHECK(std::abs(s.lambda[1][0]) < 1e-10);
  CHECK(std::abs(s.lambda[2][0] - kPi * kPi / 4) < 1e-10);
  CHECK(std::abs(s.lambda[0][0] - s.lambda[2][0]) < 1e-12);
  std::ostringstream os;
  write_band_csv(os, s);
  CHECK(os.str().rfind("theta_1,band,lambda\n", 0) == 0);
}

TEST_CASE("Mathieu band 0 has its minimum at theta = 0") {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  FourierLattice lat = build_lattice(1, 16);
  BlochBuilder build = [&](const VecR& t) { return assemble_periodic(m, t, lat); };
  GridSpec g = GridSpec::uniform(1, -0.5, 0.5, 33);
  BandSurface s = band_surface(build, {0}, g);
  int arg = 0;
  for (int i = 1; i < g.size(); ++i)
    if (s.lambda[i][0] < s.lambda[arg][0]) arg = i;
  CHECK(std::abs(g.node(arg)(0)) < 1e-12);
  CHECK(s.lipschitz > 0);
  for (int i = 0; i + 1 < g.size(); ++i)
    CHECK(std::abs(s.lambda[i + 1][0] - s.lambda[i][0]) <= s.lipschitz * (1.0 / 32) * (1 + 1e-12));
}

TEST_CASE("multiplicity") {
  FourierLattice lat = build_lattice(1, 8);
  CHECK(multiplicity(assemble_periodic(free_medium(1, 2), th1(0.0), lat), kFourPi2, 1e-6) == 2);
  BlochMatrix mb = assemble_periodic(mathieu_medium(1, 2, 1.0), th1(0.0), lat);
  const double l0 = lowest_bands(mb, 1)[0].lambda;
  CHECK(multiplicity(mb, l0, 1e-6) == 1);
  const double l1 = lowest_bands(mb, 2)[1].lambda;
  CHECK(multiplicity(mb, l0, (l1 - l0) * 1.01) >= 2);
}

TEST_CASE("band count beyond the lattice is rejected") {
  CHECK_THROWS_AS(lowest_bands(assemble_periodic(free_medium(1, 2), th1(0.0), build_lattice(1, 1)), 4), ConfigError);
}
