#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "bwh/perturbation.hpp"

using namespace bwh;

namespace {

MatC diag(std::initializer_list<double> v) {
  VecR d(v.size());
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.cast<cxd>().asDiagonal();
}

MatC offdiag_ones() {
  MatC a = MatC::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  return a;
}

VecR z1(double z) {
  VecR v(1);
  v << z;
  return v;
}

VecC unit(int d, int i) {
  VecC e = VecC::Zero(d);
  e(i) = 1.0;
  return e;
}

}  // namespace

TEST_CASE("series radius") {
  MatrixSeries single;
  single.d = 2;
  single.add({0}, diag({0, 1}));
  CHECK(std::isinf(series_radius(single)));
  CHECK(std::isinf(series_radius(linear_family(diag({0, 1}), offdiag_ones()))));

  const double c = 0.8;
  MatrixSeries geo;
  geo.d = 2;
  for (int k = 0; k <= 6; ++k) geo.add({k}, diag({std::pow(c, k + 1), 0.0}));
  geo.tail_c = c;
  CHECK(std::abs(series_radius(geo) - 1.0 / c) < 1e-15);

  MatrixSeries empty;
  empty.d = 2;
  CHECK_THROWS_AS(series_radius(empty), ConfigError);
}

TEST_CASE("series evaluation is Hermitian") {
  MatrixSeries s;
  s.d = 3;
  s.nvars = 2;
  MatC a = MatC::Random(3, 3);
  MatC b = MatC::Random(3, 3);
  s.add({0, 0}, a + a.adjoint());
  s.add({1, 0}, b + b.adjoint());
  s.add({1, 2}, diag({1, 2, 3}));
  s.validate();
  VecR z(2);
  z << 0.3, -0.7;
  MatC A = s.at(z);
  CHECK((A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(((a + a.adjoint()) + 0.3 * (b + b.adjoint()) + 0.3 * 0.49 * diag({1, 2, 3}) - A).norm() < 1e-14);
  MatrixSeries bad;
  bad.d = 2;
  bad.add({0}, offdiag_ones() * cxd(0, 1));
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pseudo-inverse") {
  SUBCASE("simple kernel") {
    MatC R = pseudo_inverse(diag({0, 1}), 0.0, {unit(2, 0)});
    CHECK((R - diag({0, 1})).norm() < 1e-15);
  }
  SUBCASE("double kernel") {
    MatC R = pseudo_inverse(diag({0, 0, 2}), 0.0, {unit(3, 0), unit(3, 1)});
    CHECK((R - diag({0, 0, 0.5})).norm() < 1e-15);
  }
  SUBCASE("commutes and inverts on the complement") {
    MatC X = MatC::Random(5, 5);
    MatC A = X + X.adjoint();
    VecR ev;
    MatC V;
    dense_spectrum(A, ev, V);
    MatC R = pseudo_inverse(A, ev(2), {V.col(2)});
    CHECK((R * A - A * R).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((R - R.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    MatC P = V.col(2) * V.col(2).adjoint();
    MatC shifted = A - ev(2) * MatC::Identity(5, 5);
    CHECK((R * shifted - (MatC::Identity(5, 5) - P)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((R * V.col(2)).norm() <= 1e-12);
  }
  SUBCASE("wrong kernel is rejected") {
    CHECK_THROWS_AS(pseudo_inverse(diag({0, 1}), 0.0, {unit(2, 1)}), ConfigError);
  }
}

TEST_CASE("2x2 branch against the closed-form diagonalization") {
  MatrixSeries s = linear_family(diag({0, 1}), offdiag_ones());
  BranchResult r = track_branches(s, 0.0, 1, {z1(0.0), z1(0.05), z1(0.1)});
  REQUIRE(r.samples.size() == 3);
  CHECK(r.samples[0].lambda[0] == 0.0);
  const double oracle = (1.0 - std::sqrt(1.04)) / 2.0;
  CHECK(std::abs(r.samples[2].lambda[0] - oracle) <= 1e-12);
  CHECK(std::abs(r.samples[2].lambda[0] - (-0.00990195)) <= 1e-8);
  for (const auto& smp : r.samples) {
    CHECK(smp.residual <= 1e-9);
    CHECK(smp.imag_part <= 1e-12);
  }
  const auto iso = isolation_check(s, r, 0.9, 0.5);
  for (bool b : iso) CHECK(b);
}

TEST_CASE("degenerate diagonal family splits into +-z") {
  MatrixSeries s = linear_family(diag({0, 0}), diag({1, -1}));
  BranchResult r = track_branches(s, 0.0, 2, {z1(0.0), z1(0.1), z1(0.2), z1(0.3)});
  CHECK(r.multiplicity == 2);
  for (const auto& smp : r.samples) {
    const double z = smp.z(0);
    const double lo = std::min(smp.lambda[0], smp.lambda[1]);
    const double hi = std::max(smp.lambda[0], smp.lambda[1]);
    CHECK(std::abs(lo + z) <= 1e-14);
    CHECK(std::abs(hi - z) <= 1e-14);
  }
  // Each branch keeps its own eigenvector, so the order never swaps.
  CHECK(r.samples[3].lambda[0] * r.samples[1].lambda[0] > 0.0);
}

TEST_CASE("isolation is reported false once a branch leaves the window") {
  MatrixSeries s = linear_family(diag({0, 1}), diag({1, 0}));
  BranchResult r = track_branches(s, 0.0, 1, {z1(0.0), z1(0.3), z1(0.6)});
  const auto iso = isolation_check(s, r, 0.9, 0.5);
  REQUIRE(iso.size() == 3);
  CHECK(iso[0]);
  CHECK(iso[1]);
  CHECK_FALSE(iso[2]);
}

TEST_CASE("isolation precondition and radius errors") {
  MatrixSeries s = linear_family(diag({0, 0.5}), offdiag_ones());
  BranchResult r = track_branches(s, 0.0, 1, {z1(0.0)});
  CHECK_THROWS_AS(isolation_check(s, r, 0.9, 0.3), ConfigError);
  CHECK_THROWS_AS(isolation_check(s, r, 0.4, 0.5), ConfigError);

  MatrixSeries g;
  g.d = 2;
  for (int k = 0; k <= 4; ++k) g.add({k}, diag({k == 0 ? 0.0 : std::pow(2.0, k + 1), 1.0}));
  g.tail_c = 2.0;
  CHECK_THROWS_AS(track_branches(g, 0.0, 1, {z1(0.0), z1(0.6)}), ConfigError);
  CHECK_THROWS_AS(track_branches(s, 0.3, 1, {z1(0.0)}), ConfigError);
}

TEST_CASE("random Hermitian family: oracle equivalence, reality and continuity") {
  const int d = 12;
  MatC X = MatC::Random(d, d), Y = MatC::Random(d, d), W = MatC::Random(d, d);
  MatC A0 = VecR::LinSpaced(d, 0.0, 11.0).cast<cxd>().asDiagonal();
  MatrixSeries s;
  s.d = d;
  s.add({0}, A0);
  s.add({1}, 0.05 * (X + X.adjoint()));
  s.add({2}, 0.02 * (Y + Y.adjoint()));
  s.add({3}, 0.01 * (W + W.adjoint()));
  std::vector<VecR> zs;
  for (int j = 0; j <= 20; ++j) zs.push_back(z1(0.01 * j));
  BranchResult r = track_branches(s, 3.0, 1, zs);
  for (const auto& smp : r.samples) {
    VecR ev;
    MatC V;
    dense_spectrum(s.at(smp.z), ev, V);
    CHECK((ev.array() - smp.lambda[0]).abs().minCoeff() <= 1e-9);
    CHECK(smp.imag_part <= 1e-12);
    CHECK(smp.residual <= 1e-9);
  }
  for (size_t j = 1; j < r.samples.size(); ++j) {
    const double dl = std::abs(r.samples[j].lambda[0] - r.samples[j - 1].lambda[0]);
    CHECK(dl <= r.lipschitz * 0.01 * (1 + 1e-12));
  }
  CHECK(r.window > 0.0);
}

TEST_CASE("reduced determinant vanishes on the branches") {
  MatrixSeries s = linear_family(diag({0, 1, 3}), [] {
    MatC a = MatC::Zero(3, 3);
    a(0, 1) = a(1, 0) = 1.0;
    a(0, 2) = a(2, 0) = 0.5;
    return a;
  }());
  BranchResult r = track_branches(s, 0.0, 1, {z1(0.0), z1(0.1)});
  const double lam = r.samples[1].lambda[0];
  CHECK(std::abs(feshbach_determinant(s, {unit(3, 0)}, lam, z1(0.1))) <= 1e-12);
  CHECK(std::abs(feshbach_determinant(s, {unit(3, 0)}, lam + 0.05, z1(0.1))) > 1e-3);
}

TEST_CASE("branch CSV layout") {
  MatrixSeries s = linear_family(diag({0, 1}), offdiag_ones());
  BranchResult r = track_branches(s, 0.0, 1, {z1(0.0), z1(0.1)});
  isolation_check(s, r, 0.9, 0.5);
  std::ostringstream os;
  write_branch_csv(os, r);
  std::string header;
  std::istringstream is(os.str());
  std::getline(is, header);
  CHECK(header == "z0,branch,lambda,isolation");
}
