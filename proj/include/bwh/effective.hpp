#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bwh/assembly.hpp"
#include "bwh/cell_problems.hpp"
#include "bwh/eigensolve.hpp"

namespace bwh {

struct CriticalOptions {
  int max_iterations = 60;
  double grad_tol = 1e-10;
  double crossing_tol = 1e-8;  // smallest admissible gap to a neighbouring band
  double box = 0.5;            // |theta_a| must stay within this bound
};

struct CriticalResult {
  BandPoint point;
  int iterations = 0;
  double grad_norm = 0.0;
  int fallbacks = 0;  // grid-refined restarts after an indefinite Hessian
};

// Band point with a gap check against the neighbouring bands.
BandPoint band_point(const CellForm& form, const VecR& theta, int band, double crossing_tol = 1e-8);

CriticalResult find_critical(const CellForm& form, int band, const VecR& theta_init,
                             const CriticalOptions& opt = {});
CriticalResult find_critical(const CellMedium& medium, const FourierLattice& lat, int band,
                             const VecR& theta_init, const CriticalOptions& opt = {});

// D^2 lambda by the central 5-point stencil per axis (mixed entries: Richardson-combined
// 4-point cross stencils at h and 2h).
MatR fd_hessian(const CellForm& form, const VecR& theta, int band, double h = 1e-3);

enum class Route { bilinear, hessian_fd, sac };
std::string route_name(Route r);

struct EffectiveOptions {
  double fd_step = 1e-3;
  double route_tol = 1e-4;
  bool check_routes = true;
};

struct EffectiveCoefficients {
  VecR theta_star;
  int band = 0;
  double lambda_star = 0.0;
  MatC B;
  MatR A_star;
  double U_star = 0.0;
  double c_psi = 1.0;
  Route route = Route::bilinear;
  MatR A_fd;   // (1/8 pi^2) FD Hessian (empty when routes are not checked)
  MatR A_sac;  // (1/2) second-auxiliary identity
  double route_discrepancy = 0.0;
  double grad_norm = 0.0;
};

// Unnormalized tensor sums: T1(f,g)_kl = g^* T[AJ_kl] f and the two mixed groups
// T2, T3 built from L and AJ with the gradient G_b = 2i pi kappa_b.
MatC tensor_t1(const CellForm& form, const VecC& f, const VecC& g);
MatC tensor_t2(const CellForm& form, const VecR& theta, const VecC& f, const std::vector<VecC>& x);
MatC tensor_t3(const CellForm& form, const VecR& theta, const VecC& f, const std::vector<VecC>& x);
// c * B = T1(psi, psi) + T2(psi, xi) - T3(psi, xi)
MatC bilinear_tensor(const CellForm& form, const VecR& theta, const VecC& psi, const std::vector<VecC>& xi);

EffectiveCoefficients effective_coefficients(const CellForm& form, const BandPoint& p,
                                             const AuxiliaryFields& aux, const EffectiveOptions& opt = {});
EffectiveCoefficients effective_coefficients(const CellMedium& medium, const FourierLattice& lat,
                                             const BandPoint& p, const AuxiliaryFields& aux,
                                             const EffectiveOptions& opt = {});

struct PerturbationSeries {
  VecR theta1;
  double lambda1 = 0.0;
  MatC B0, B1;
  MatR A0, A1;
  double U0 = 0.0, U1 = 0.0;
  double c0 = 1.0, c1 = 0.0;
  CorrectorFields correctors;
};

// form0: periodic unit-cell form; form1: first_order_form for the deformation stats.
PerturbationSeries quasi_perfect_series(const CellForm& form0, const CellForm& form1, const BandPoint& p,
                                        const AuxiliaryFields& aux, const CorrectorFields& corr);
PerturbationSeries quasi_perfect_series(const CellMedium& medium, const FourierLattice& lat,
                                        const BandPoint& p, const AuxiliaryFields& aux,
                                        const CorrectorFields& corr, const GradientStats& stats);

struct OracleRow {
  double eta = 0.0;
  VecR theta_star;
  double lambda = 0.0;
  MatR A_star;
  double U_star = 0.0;
  double lambda_remainder = 0.0;  // |lambda(eta) - lambda_per - eta lambda1|
  double A_remainder = 0.0;       // ||A*(eta) - A*_per - eta A1||_F
  int iterations = 0;
};

struct OracleTable {
  int band_unit = 0;
  int band_super = 0;
  int period = 1;
  std::vector<OracleRow> rows;
  double slope_lambda = 0.0;  // least-squares slope of log remainder vs log eta
  double slope_A = 0.0;
  std::vector<double> pair_slopes_lambda, pair_slopes_A;
};

struct OracleOptions {
  int cutoff = 16;  // unit-cell cutoff; the supercell uses cutoff * p
  DeformedOptions deformed;
  CriticalOptions critical;
};

// Full supercell pipeline per eta. The series supplies lambda1 and A1 for the
// remainders; pass the unperturbed series (lambda1 = 0, A1 = 0) to tabulate only.
OracleTable supercell_oracle(const CellMedium& medium, const Displacement& z, const std::vector<double>& etas,
                             int band, const VecR& theta_star, const PerturbationSeries& series,
                             const OracleOptions& opt = {});

// Least-squares slope of log y against log x over entries with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_oracle_csv(std::ostream& os, const OracleTable& t);

}  // namespace bwh
