#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "bwh/assembly.hpp"
#include "bwh/common.hpp"

namespace bwh {

struct BandPoint {
  VecR theta;
  int band = 0;
  double lambda = 0.0;
  VecC psi;  // Fourier coefficients, <psi, psi>_M = 1
  double residual = 0.0;
};

struct EigenOptions {
  int dense_limit = 2000;   // dense solver up to this flat size
  int max_iterations = 500; // shift-invert budget
  double tol = 1e-12;
};

// k lowest eigenpairs of (H, M), ascending and M-orthonormal.
std::vector<BandPoint> lowest_bands(const BlochMatrix& m, int count, const EigenOptions& opt = {});
// All eigenvalues of (H, M), ascending (dense).
VecR all_eigenvalues(const BlochMatrix& m);

// Number of eigenvalues in [lambda - tol, lambda + tol].
int multiplicity(const BlochMatrix& m, double lambda, double tol);

struct GridSpec {
  std::vector<std::vector<double>> axes;  // node coordinates per axis
  static GridSpec uniform(int dim, double lo, double hi, int nodes);
  int size() const;
  VecR node(int idx) const;
};

struct BandSurface {
  GridSpec grid;
  std::vector<int> bands;
  std::vector<std::vector<double>> lambda;  // [node][band slot]
  std::vector<double> gap;                  // to the next band, per node (band slot 0)
  std::vector<int> crossings;               // nodes whose gap falls below the tolerance
  double lipschitz = 0.0;
};

using BlochBuilder = std::function<BlochMatrix(const VecR&)>;

BandSurface band_surface(const BlochBuilder& build, const std::vector<int>& bands, const GridSpec& grid,
                         double crossing_tol = 1e-8);

void write_band_csv(std::ostream& os, const BandSurface& s);

}  // namespace bwh
