#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "bwh/common.hpp"

namespace bwh {

using MultiIndex = std::vector<int>;

// A(z) = sum_alpha z^alpha A_alpha with Hermitian coefficients. An optional
// declared tail ||A_alpha|| <= c^{|alpha|+1} covers the truncated remainder.
struct MatrixSeries {
  int d = 0;
  int nvars = 1;
  std::map<MultiIndex, MatC> coeffs;
  std::optional<double> tail_c;

  void add(const MultiIndex& alpha, const MatC& a);
  MatC at(const VecR& z) const;
  double hermitian_defect() const;  // max over coefficients of ||A - A^*||_max
  void validate() const;
};

// Two-term family A0 + z A1 in one variable.
MatrixSeries linear_family(const MatC& A0, const MatC& A1);

// 1 / limsup (max_{|alpha|=k} ||A_alpha||)^{1/k}; +inf for polynomial families.
double series_radius(const MatrixSeries& s);

// R = (A0 - lambda)^{-1} on the complement of span(psi), zero on the span.
MatC pseudo_inverse(const MatC& A0, double lambda, const std::vector<VecC>& psi, double tol = 1e-10);

// min(radius, 1 / (8 ||R|| max(1, c^2 c_hat))) with c the measured growth rate
// of the coefficients and c_hat the largest first-order coefficient norm.
double smallness_window(const MatrixSeries& s, const MatC& R);

struct BranchSample {
  VecR z;
  std::vector<double> lambda;
  std::vector<VecC> psi;
  double residual = 0.0;   // max ||A(z) psi_i - lambda_i psi_i||
  double imag_part = 0.0;  // max |Im psi_i^* A(z) psi_i|
  double min_overlap = 1.0;
  bool in_window = true;
};

struct BranchResult {
  double lambda0 = 0.0;
  int multiplicity = 1;
  double radius = 0.0;
  double window = 0.0;
  double lipschitz = 0.0;  // max |lambda_i(z_{j+1}) - lambda_i(z_j)| / |z_{j+1} - z_j|
  std::vector<BranchSample> samples;
  std::vector<bool> isolation;  // filled by isolation_check
};

// Dense Hermitian spectrum (ascending) with eigenvectors.
void dense_spectrum(const MatC& A, VecR& values, MatC& vectors);

// Optimal assignment of rows to distinct columns maximizing the summed weight
// (rows <= cols). Returns the column of each row.
std::vector<int> max_weight_assignment(const MatR& w);

// Continues the h eigenvalues at lambda0 of A(0) along the sample path by
// overlap matching. A degenerate start basis is rotated to diagonalize the
// first increment.
BranchResult track_branches(const MatrixSeries& s, double lambda0, int h, const std::vector<VecR>& samples);

// Per sample: spectrum of A(z) inside (lambda0 - d', lambda0 + d') equals the
// tracked branches. Precondition: spectrum of A(0) inside (lambda0 - d, lambda0 + d)
// is {lambda0} with the tracked multiplicity.
std::vector<bool> isolation_check(const MatrixSeries& s, BranchResult& r, double d, double d_prime);

// Reduced determinant F(rho, z) = det(rho - P A P + P A Q (Q (A - rho) Q)^{-1} Q A P)
// on the unperturbed eigenspace P = span(psi); its zeros near lambda0 are the branches.
cxd feshbach_determinant(const MatrixSeries& s, const std::vector<VecC>& psi, double rho, const VecR& z);

void write_branch_csv(std::ostream& os, const BranchResult& r);

}  // namespace bwh
