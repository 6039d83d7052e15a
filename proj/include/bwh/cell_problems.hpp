#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/LU>

#include "bwh/assembly.hpp"
#include "bwh/eigensolve.hpp"

namespace bwh {

// Solves (H - lambda M) u = rhs with <u, psi_k>_M = 0 through a bordered system
// that is factorized once and reused across right-hand sides.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const BlochMatrix& m, double lambda, const std::vector<VecC>& kernel,
                    double solvability_tol = 1e-8);
  VecC solve(const VecC& rhs) const;
  // max_k |<rhs, psi_k>| / max(1, ||rhs||)
  double kernel_projection(const VecC& rhs) const;
  double last_residual() const { return last_residual_; }

 private:
  MatC A_;    // H - lambda M
  MatC MK_;   // M * kernel
  MatC K_;    // kernel
  Eigen::PartialPivLU<MatC> lu_;
  double tol_;
  mutable double last_residual_ = 0.0;
};

VecC constrained_solve(const BlochMatrix& m, double lambda, const std::vector<VecC>& kernel, const VecC& rhs);

struct AuxiliaryFields {
  std::vector<VecC> xi;        // xi_k = (2i pi)^{-1} d psi / d theta_k
  VecR grad_lambda;            // Hellmann-Feynman gradient
  std::vector<cxd> gauge;      // <xi_k, psi>_M
  double residual = 0.0;       // worst relative residual of the solves
  VecC psi_k(int k) const { return (kI * kTwoPi) * xi[k]; }
};

// Hellmann-Feynman gradient <D_k psi, psi> / <psi, psi>_M.
VecR hf_gradient(const CellForm& form, const BandPoint& p);

AuxiliaryFields first_auxiliary(const CellForm& form, const BandPoint& p);
AuxiliaryFields first_auxiliary(const CellMedium& medium, const FourierLattice& lat, const BandPoint& p);

// (1/4 pi^2) D^2 lambda from the second auxiliary identity. hessian_via_sac
// insists on a critical point; sac_hessian evaluates the identity anywhere.
MatR sac_hessian(const CellForm& form, const BandPoint& p, const AuxiliaryFields& aux);
MatR hessian_via_sac(const CellForm& form, const BandPoint& p, const AuxiliaryFields& aux);
MatR hessian_via_sac(const CellMedium& medium, const FourierLattice& lat, const BandPoint& p,
                     const AuxiliaryFields& aux);

// Expected displacement gradient E[grad Z] sampled on the unit-cell grid.
struct GradientStats {
  SampleGrid grid;
  int n = 1;
  std::vector<std::vector<double>> EgradZ;  // n*n components
  std::vector<double> EdivZ;
};

struct CorrectorFields {
  VecC psi1;                 // E[psi^(1)]
  std::vector<VecC> xi1;     // E[xi_k^(1)]
  double lambda1 = 0.0;
  VecR theta1;
  MatR theta_system;         // matrix of the theta^(1) solvability system
  double solvability = 0.0;  // worst kernel projection after insertion
  cxd gauge_alpha = 0.0;     // psi1 <- psi1 + alpha psi was applied
};

// form0: periodic form at the unit cell; form1: first_order_form for the stats.
CorrectorFields first_order_correctors(const CellForm& form0, const CellForm& form1, const BandPoint& p,
                                       const AuxiliaryFields& aux, cxd gauge_alpha = 0.0);
CorrectorFields first_order_correctors(const CellMedium& medium, const FourierLattice& lat,
                                       const BandPoint& p, const AuxiliaryFields& aux,
                                       const GradientStats& stats, cxd gauge_alpha = 0.0);

// Coefficient dump: index, re, im (header row included).
void write_coefficients_csv(std::ostream& os, const VecC& v);

}  // namespace bwh
