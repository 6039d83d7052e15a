#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bwh/assembly.hpp"
#include "bwh/cell_problems.hpp"
#include "bwh/field.hpp"

namespace bwh {

enum class SystemKind { torus_shift, cyclic_shift, bernoulli };

SystemKind system_kind_from_string(const std::string& s);
std::string to_string(SystemKind k);

// Point of the sample space. torus: x in [0,1)^n; cyclic: k in (Z/p)^n;
// bernoulli: the word s_j = draw(seed, j + k) for j in Z^n.
struct Omega {
  std::vector<double> x;
  std::vector<long long> k;
  std::uint64_t seed = 0;
};

struct DynamicalSystem {
  SystemKind kind = SystemKind::cyclic_shift;
  int dim = 1;
  int p = 1;                  // cyclic period
  std::vector<double> probs;  // bernoulli state weights p_0..p_m
  std::uint64_t seed = 0;

  // Deterministic i-th sample of the invariant measure.
  Omega sample(std::uint64_t i) const;
  Omega act(const std::vector<long long>& shift, const Omega& w) const;
  // Continuous action (torus only).
  Omega act_real(const std::vector<double>& shift, const Omega& w) const;
  // State of cell c under w (cyclic: sum of (w + c) mod p; bernoulli: s_c).
  int symbol(const Omega& w, const std::vector<long long>& cell) const;
  int symbol_count() const;
  double symbol_weight(int s) const;
};

DynamicalSystem make_dynamical_system(SystemKind kind, int dim, int p, const std::vector<double>& probs,
                                      std::uint64_t seed);

// Counter-based uniform draw in [0,1) from (seed, index words).
double hash_uniform(std::uint64_t seed, const std::vector<long long>& idx);

enum class Profile { poly, sine, wave };
Profile profile_from_string(const std::string& s);
std::string to_string(Profile p);

// 1D profile h on [0,1) and its derivative.
double profile_value(Profile p, double t);
double profile_derivative(Profile p, double t);

struct BumpParams {
  Profile profile = Profile::poly;
  std::vector<double> amplitudes{0.0, 1.0};  // per cell state
  VecR direction;                            // empty: all ones
};

// Z(y, w) = a_s phi(frac y) e with s the state of the cell containing y and
// phi(t) = prod_a h(t_a) (divided by 2 pi for the wave profile).
class BumpDisplacement : public Displacement {
 public:
  BumpDisplacement(DynamicalSystem sys, BumpParams params, Omega omega);
  int dim() const override { return sys_.dim; }
  // cyclic: p; bernoulli and torus realizations are aperiodic (0).
  int period() const override;
  void eval(const std::vector<double>& y, VecR& z, MatR& grad) const override;

  BumpDisplacement at(const Omega& w) const { return BumpDisplacement(sys_, params_, w); }
  // E[grad Z](y) over the invariant measure (exact for cyclic and bernoulli).
  MatR expected_grad(const std::vector<double>& y) const;
  const DynamicalSystem& system() const { return sys_; }
  const Omega& omega() const { return omega_; }
  const BumpParams& params() const { return params_; }

 private:
  double phi(const std::vector<double>& t, std::vector<double>* dphi) const;
  DynamicalSystem sys_;
  BumpParams params_;
  Omega omega_;
  VecR e_;
};

// Deterministic period-1 displacement Z(y) = amplitude * h(y) e for a profile.
BumpDisplacement deterministic_displacement(int dim, Profile profile, double amplitude);

struct DeformationSpec {
  std::shared_ptr<const BumpDisplacement> Z;
  double eta = 0.0;
  double nu = 0.0;    // observed min det(grad Phi) over the validation sweep
  double lip = 0.0;   // observed max |grad Phi| (Frobenius)
  GradientStats stats;
  std::vector<PeriodicField> EgradZ;  // n*n
  PeriodicField EdivZ;
  double c_phi = 1.0;
};

struct PerturbedIdentityOptions {
  int cutoff = 16;       // lattice cutoff the stats are built for
  int grid_q = 0;        // unit-cell grid (0: default_cell_grid)
  double nu_floor = 1e-3;
  const CellMedium* medium = nullptr;  // used to size the default grid
};

DeformationSpec build_perturbed_identity(const BumpDisplacement& z, double eta,
                                         const PerturbedIdentityOptions& opt = {});

struct DeformationReport {
  double nu_observed = 0.0;
  double lip_observed = 0.0;
  double stationarity_residual = 0.0;
  double nu_declared = 0.0;
  bool nu_violated = false;
  std::string lip_norm = "frobenius";
};

DeformationReport validate_deformation(const DeformationSpec& spec, int samples, double nu_declared);

// Phi^{-1}(x) for Phi(y) = y + eta Z(y) by damped Newton.
std::vector<double> invert_deformation(const Displacement& z, double eta, const std::vector<double>& x);

using ScalarFn = std::function<double(const std::vector<double>&)>;

struct BirkhoffEstimate {
  double t = 0.0;
  double estimate = 0.0;
  double richardson = 0.0;  // 2 E(t) - E(t/2) when the previous level is t/2
};

// Mean of f over [0, t)^n with q midpoint nodes per unit cell and axis.
std::vector<BirkhoffEstimate> birkhoff_mean(const ScalarFn& f, int dim, const std::vector<double>& levels,
                                            int q = 16);

// Cell-and-Omega average of a cyclic-stationary function with the same quadrature.
double cyclic_cell_average(const ScalarFn& f_at_w0, int dim, int p, int q = 16);

// E[ int_cell f(y, state) det(grad Phi) ] / c_phi, with f evaluated on the
// state of the unit cell. Exact expectation over the state weights.
using StationaryFn = std::function<double(const std::vector<double>&, int)>;
double deformed_mean_closed_form(const StationaryFn& f, const BumpDisplacement& z, double eta, int q = 256,
                                 double nu_floor = 1e-3);

void write_ergodic_csv(std::ostream& os, const std::vector<BirkhoffEstimate>& est, double closed_form);

}  // namespace bwh
