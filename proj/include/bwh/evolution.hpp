#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bwh/assembly.hpp"
#include "bwh/common.hpp"
#include "bwh/lattice.hpp"

namespace bwh {

using Envelope = std::function<cxd(const std::vector<double>&)>;

// Gaussian envelope exp(-|x - c|^2 / (2 sigma^2)) (times exp(2i pi k.x) when k is set).
Envelope gaussian_envelope(const std::vector<double>& center, double sigma, const std::vector<double>& k = {});

// Finite-difference Bloch cell on a period of P unit cells with nc nodes per cell.
// Coefficients are sampled at y = Phi^{-1}(node) (A at half nodes).
struct DiscreteCell {
  int nc = 16;
  int period = 1;
  double theta = 0.0;
  int band = 0;
  double lambda = 0.0;
  double A_star = 1.0;
  double U_star = 0.0;
  std::vector<double> A_half, V, U;  // nc * period entries
  VecC psi;                          // node samples, mean |psi|^2 = 1
  int size() const { return nc * period; }
};

DiscreteCell discrete_cell(const CellMedium& medium, int nc, double theta, int band,
                           const Displacement* z = nullptr, double eta = 0.0);

// Hermitian FD Bloch matrix of the cell (y units) and its theta derivatives.
MatC discrete_bloch(const DiscreteCell& c, double theta, int order = 0);

struct WavefieldState {
  int dim = 1;
  double L = 1.0;  // box [0, L)
  int M = 0;       // grid points
  double eps = 1.0;
  double t = 0.0;
  std::vector<cxd> u;
  double h() const { return L / M; }
  double x(int j) const { return j * h(); }
};

struct EvolutionConfig {
  double eps = 1.0 / 16;
  double dt = 0.0;       // 0: min(dt_cap, 0.1 eps^2 2 pi / |V|_inf)
  double dt_cap = 1e-4;
  double T = 0.05;
  double L = 12.0;
  int cell_points = 16;
  int samples = 10;      // space-time sampling instants in (0, T]
  double mass_abort = 1e-6;
};

double choose_dt(const EvolutionConfig& cfg, const DiscreteCell& cell);

WavefieldState well_prepared_initial(const EvolutionConfig& cfg, const DiscreteCell& cell, const Envelope& v0);

struct EvolutionReport {
  std::vector<WavefieldState> snapshots;  // at the sample instants
  double dt = 0.0;
  int steps = 0;
  double mass0 = 0.0;
  double mass_drift = 0.0;    // max relative deviation over the run
  double grad_energy0 = 0.0;  // int |eps grad u|^2 at t = 0
  double grad_energy = 0.0;   // at T
  double grad_constant = 0.0; // grad_energy / (grad_energy0 + mass0)
};

// Crank-Nicolson for i u_t - (A u_x)_x + eps^-2 V u + U u = 0 (1D, periodic box).
// The run is carried in the frame rotating with lambda / eps^2 and states are
// returned in the lab frame.
EvolutionReport evolve_eps(const WavefieldState& init, const DiscreteCell& cell, const EvolutionConfig& cfg);

// Exact propagator of i v_t - div(A* grad v) + U* v = 0 on the periodic box:
// mode k is multiplied by exp(+i t (4 pi^2 A* k.k + U*)).
std::vector<cxd> evolve_homogenized(const SampleGrid& g, const std::vector<cxd>& v0, const MatR& A_star,
                                    double U_star, double t);

double l2_norm(const SampleGrid& g, const std::vector<cxd>& v);
double mass(const WavefieldState& s);

// L2 over the sample instants of v_eps - v psi(x/eps), v_eps the phase-unwound u_eps.
double corrector_error(const std::vector<WavefieldState>& u_eps, const std::vector<std::vector<cxd>>& v,
                       const DiscreteCell& cell);

struct CorrectorRun {
  double eps = 0.0;
  double error = 0.0;
  double mass_drift = 0.0;
  double grad_constant = 0.0;
  double initial_mass = 0.0;
  double dt = 0.0;
  int steps = 0;
  DiscreteCell cell;
};

CorrectorRun corrector_study(const CellMedium& medium, const EvolutionConfig& cfg, const Envelope& v0,
                             int band = 0, double theta = 0.0, const Displacement* z = nullptr,
                             double eta = 0.0);

// Driven problem i w_t - div(A grad w) + U w = S(t) solved mode-wise by
// Gauss-Legendre Duhamel quadrature (panels x 8 nodes).
using SourceFn = std::function<std::vector<cxd>(double)>;
std::vector<cxd> duhamel(const SampleGrid& g, const std::vector<cxd>& w0, const MatR& A, double U,
                         const SourceFn& source, double t, int panels = 4);

struct SplittingInput {
  MatR A_per, A1;
  double U_per = 0.0, U1 = 0.0;
  std::vector<double> etas;
  std::vector<MatR> A_eta;  // A*(eta) from the supercell oracle
  std::vector<double> U_eta;
};

struct SplittingResult {
  std::vector<double> etas, residuals;
  double slope = 0.0;
  double duhamel_discrepancy = 0.0;  // closed form vs quadrature for v1
  double w_norm = 0.0;
};

// Rescaled envelopes V(t, x) = v(t, sqrt(A) x) on the centred box [-L/2, L/2)^n.
SplittingResult splitting_series(const SplittingInput& in, const Envelope& v0, const SampleGrid& box, double T,
                                 double fd_step = 1e-4);

// Little-endian complex128 dump plus a JSON sidecar {grid, t}.
void write_snapshot(const std::string& path, const WavefieldState& s);

}  // namespace bwh
