#include <cmath>

#include "doctest.h"

#include "bwh/stochastic.hpp"
#include "media.hpp"

using namespace bwh;

TEST_CASE("dynamical system group laws") {
  SUBCASE("torus shift") {
    DynamicalSystem s = make_dynamical_system(SystemKind::torus_shift, 1, 1, {}, 0);
    Omega w;
    w.x = {0.9};
    CHECK(std::abs(s.act_real({0.3}, w).x[0] - 0.2) < 1e-15);
    CHECK(s.act_real({0.0}, w).x[0] == 0.9);
    Omega a = s.act_real({0.25}, s.act_real({0.5}, w));
    CHECK(a.x[0] == s.act_real({0.75}, w).x[0]);
  }
  SUBCASE("cyclic shift") {
    DynamicalSystem s = make_dynamical_system(SystemKind::cyclic_shift, 1, 4, {}, 0);
    Omega w;
    w.k = {2};
    CHECK(s.act({3}, w).k[0] == 1);
    CHECK(s.act({0}, w).k == w.k);
    for (long long x = -5; x <= 5; ++x)
      for (long long y = -5; y <= 5; ++y) CHECK(s.act({x + y}, w).k == s.act({x}, s.act({y}, w)).k);
  }
  SUBCASE("bernoulli window shift") {
    DynamicalSystem s = make_dynamical_system(SystemKind::bernoulli, 1, 1, {0.5, 0.5}, 11);
    Omega w = s.sample(3);
    for (long long l : {-7LL, 0LL, 1LL, 5LL})
      for (long long c = -10; c <= 10; ++c) CHECK(s.symbol(s.act({l}, w), {c}) == s.symbol(w, {c + l}));
    CHECK(s.act({2}, s.act({3}, w)).k == s.act({5}, w).k);
  }
  SUBCASE("invalid probabilities") {
    CHECK_THROWS_AS(make_dynamical_system(SystemKind::bernoulli, 1, 1, {0.5, 0.6}, 0), ConfigError);
    CHECK_THROWS_AS(make_dynamical_system(SystemKind::bernoulli, 1, 1, {1.5, -0.5}, 0), ConfigError);
  }
}

TEST_CASE("measure preservation") {
  SUBCASE("cyclic shift permutes the states") {
    DynamicalSystem s = make_dynamical_system(SystemKind::cyclic_shift, 2, 3, {}, 0);
    for (long long sx = 0; sx < 3; ++sx) {
      std::vector<int> hist(3, 0);
      for (long long a = 0; a < 3; ++a)
        for (long long b = 0; b < 3; ++b) {
          Omega w;
          w.k = {a, b};
          ++hist[s.symbol(s.act({sx, 1}, w), {0, 0})];
        }
      CHECK(hist == std::vector<int>{3, 3, 3});
    }
  }
  SUBCASE("bernoulli shift within three sigma") {
    const std::vector<double> probs{0.2, 0.5, 0.3};
    DynamicalSystem s = make_dynamical_system(SystemKind::bernoulli, 1, 1, probs, 5);
    const int N = 100000;
    for (long long l : {0LL, 17LL}) {
      std::vector<int> hist(3, 0);
      for (int i = 0; i < N; ++i) ++hist[s.symbol(s.act({l}, s.sample(i)), {0})];
      for (int k = 0; k < 3; ++k) {
        const double sigma = std::sqrt(N * probs[k] * (1 - probs[k]));
        CHECK(std::abs(hist[k] - N * probs[k]) <= 3 * sigma);
      }
    }
  }
}

TEST_CASE("perturbed identity statistics") {
  SUBCASE("zero displacement") {
    DeformationSpec spec = build_perturbed_identity(deterministic_displacement(2, Profile::poly, 0.0), 0.3);
    for (const auto& c : spec.stats.EgradZ)
      for (double v : c) CHECK(v == 0.0);
    CHECK(spec.c_phi == 1.0);
    DeformationReport r = validate_deformation(spec, 50, 0.5);
    CHECK(r.nu_observed == 1.0);
    CHECK(std::abs(r.lip_observed - std::sqrt(2.0)) < 1e-15);
    CHECK(r.stationarity_residual == 0.0);
    CHECK(r.lip_norm == "frobenius");
  }
  SUBCASE("deterministic sine displacement") {
    DeformationSpec spec = build_perturbed_identity(deterministic_displacement(1, Profile::wave, 1.0), 0.1);
    CHECK(spec.nu >= 0.9 - 1e-12);
    CHECK(spec.nu <= 0.9 + 1e-2);
    CHECK(std::abs(spec.c_phi - 1.0) < 1e-12);
    for (int p = 0; p < spec.stats.grid.size(); ++p) {
      const double y = spec.stats.grid.point(p)[0];
      CHECK(std::abs(spec.stats.EdivZ[p] - std::cos(kTwoPi * y)) < 1e-12);
    }
  }
  SUBCASE("cyclic two-state bump averages with equal weights") {
    BumpDisplacement z = bwh::testing::cyclic_bump(1, Profile::poly, {0.0, 1.0});
    DeformationSpec spec = build_perturbed_identity(z, 0.05);
    for (int p = 0; p < spec.stats.grid.size(); ++p) {
      const double t = spec.stats.grid.point(p)[0];
      CHECK(std::abs(spec.stats.EgradZ[0][p] - 0.5 * profile_derivative(Profile::poly, t)) < 1e-12);
      CHECK(std::abs(spec.stats.EdivZ[p] - spec.stats.EgradZ[0][p]) < 1e-12);
    }
  }
  SUBCASE("divergence is the trace in 2D") {
    DynamicalSystem sys = make_dynamical_system(SystemKind::cyclic_shift, 2, 2, {}, 0);
    BumpParams bp;
    bp.amplitudes = {0.2, 0.7};
    bp.direction = VecR(2);
    bp.direction << 1.0, -0.5;
    Omega w;
    w.k = {0, 1};
    DeformationSpec spec = build_perturbed_identity(BumpDisplacement(sys, bp, w), 0.05);
    for (int p = 0; p < spec.stats.grid.size(); ++p)
      CHECK(std::abs(spec.stats.EdivZ[p] - spec.stats.EgradZ[0][p] - spec.stats.EgradZ[3][p]) <= 1e-12);
  }
  SUBCASE("eta beyond the threshold") {
    BumpDisplacement z = deterministic_displacement(1, Profile::poly, 1.0);
    CHECK_THROWS_AS(build_perturbed_identity(z, 0.5), ConfigError);
    DeformationReport r = validate_deformation(build_perturbed_identity(z, 0.2), 20, 0.5);
    CHECK(r.nu_violated);
  }
}

TEST_CASE("constructed samplers are stationary") {
  for (int dim : {1, 2}) {
    DynamicalSystem sys = make_dynamical_system(SystemKind::cyclic_shift, dim, 3, {}, 9);
    BumpParams bp;
    bp.amplitudes = {0.0, 0.5, 1.0};
    DeformationSpec spec = build_perturbed_identity(BumpDisplacement(sys, bp, sys.sample(0)), 0.1);
    CHECK(validate_deformation(spec, 200, 0.5).stationarity_residual <= 1e-12);
  }
  DynamicalSystem b = make_dynamical_system(SystemKind::bernoulli, 1, 1, {0.4, 0.6}, 2);
  BumpParams bp;
  bp.amplitudes = {0.3, 1.0};
  DeformationSpec spec = build_perturbed_identity(BumpDisplacement(b, bp, b.sample(0)), 0.1);
  CHECK(validate_deformation(spec, 200, 0.5).stationarity_residual <= 1e-12);
}

TEST_CASE("Birkhoff means") {
  SUBCASE("periodic mean") {
    auto est = birkhoff_mean([](const std::vector<double>& y) { return std::pow(std::sin(kTwoPi * y[0] * 0.77), 2); },
                             1, {16, 64, 256, 1024});
    CHECK(std::abs(est.back().estimate - 0.5) < 1e-2);
    CHECK(std::abs(est.back().estimate - 0.5) <= std::abs(est.front().estimate - 0.5) + 1e-12);
  }
  SUBCASE("constants are exact") {
    for (const auto& e : birkhoff_mean([](const std::vector<double>&) { return 2.75; }, 2, {1, 2, 4}))
      CHECK(e.estimate == doctest::Approx(2.75).epsilon(1e-15));
  }
  SUBCASE("cyclic p = 3 data is exact at multiples of the period") {
    DynamicalSystem sys = make_dynamical_system(SystemKind::cyclic_shift, 1, 3, {}, 0);
    Omega w0;
    w0.k = {1};
    const std::vector<double> offs{0.5, -1.0, 2.0};
    auto f = [&](const std::vector<double>& y) {
      return offs[sys.symbol(w0, {static_cast<long long>(std::floor(y[0]))})] + std::cos(kTwoPi * y[0]) +
             std::pow(y[0] - std::floor(y[0]), 2);
    };
    const double exact = cyclic_cell_average(f, 1, 3);
    auto est = birkhoff_mean(f, 1, {3.0 * 1024});
    CHECK(std::abs(est[0].estimate - exact) <= 1e-10);
  }
}

TEST_CASE("deformed mean closed form") {
  SUBCASE("cosine under the sine deformation") {
    BumpDisplacement z = deterministic_displacement(1, Profile::wave, 1.0);
    auto f = [](const std::vector<double>& y, int) { return std::cos(kTwoPi * y[0]); };
    const double eta = 0.1;
    const double cf = deformed_mean_closed_form(f, z, eta);
    CHECK(std::abs(cf - eta / 2) < 1e-12);
    auto pulled = [&](const std::vector<double>& x) {
      return std::cos(kTwoPi * invert_deformation(z, eta, x)[0]);
    };
    CHECK(std::abs(birkhoff_mean(pulled, 1, {1024})[0].estimate - cf) < 1e-2);
  }
  SUBCASE("constants are preserved") {
    BumpDisplacement z = bwh::testing::cyclic_bump(1, Profile::poly, {0.2, 1.0});
    CHECK(std::abs(deformed_mean_closed_form([](const std::vector<double>&, int) { return -1.5; }, z, 0.1) + 1.5) <
          1e-12);
  }
  SUBCASE("random cyclic deformation against the empirical mean") {
    BumpDisplacement z = bwh::testing::cyclic_bump(1, Profile::sine, {0.3, 1.0});
    const double eta = 0.15;
    auto f = [](const std::vector<double>& y, int s) {
      return (s == 0 ? 0.4 : -0.8) + std::cos(kTwoPi * y[0]);
    };
    const double cf = deformed_mean_closed_form(f, z, eta);
    auto pulled = [&](const std::vector<double>& x) {
      const double y = invert_deformation(z, eta, x)[0];
      const long long c = static_cast<long long>(std::floor(y));
      return f({y - c}, z.system().symbol(z.omega(), {c}));
    };
    CHECK(std::abs(birkhoff_mean(pulled, 1, {1024})[0].estimate - cf) < 1e-2);
  }
}
