#pragma once

#include <array>
#include <vector>

#include "bwh/common.hpp"

namespace bwh {

// Truncated Fourier lattice {m in Z^dim : |m_i| <= cutoff}. Mode m carries the
// wavevector m / period, so period p > 1 describes a p-supercell.
struct FourierLattice {
  int dim = 1;
  int cutoff = 1;
  int period = 1;

  int side() const { return 2 * cutoff + 1; }
  int flat_size() const;
  int flat(const std::vector<int>& m) const;
  std::vector<int> multi(int idx) const;
  bool contains(const std::vector<int>& m) const;
  // Wavevector component along axis a of the mode at flat index idx.
  double kappa(int idx, int a) const;
};

FourierLattice build_lattice(int dim, int cutoff, int period = 1);

// Index arithmetic for differences m' - m of two lattice modes (cutoff 2N).
class DiffIndex {
 public:
  explicit DiffIndex(const FourierLattice& lat);
  int size() const { return size_; }
  int side() const { return side_; }
  int dim() const { return dim_; }
  // Flat index of (mode r) - (mode c) for flat lattice indices r, c.
  int of(int r, int c) const {
    int idx = 0;
    for (int a = 0; a < dim_; ++a) idx = idx * side_ + (mr_[r][a] - mr_[c][a] + 2 * cutoff_);
    return idx;
  }
  std::vector<int> multi(int idx) const;

 private:
  int dim_, cutoff_, side_, size_;
  std::vector<std::array<int, 2>> mr_;
};

// Coefficients c(k) of a field over the difference lattice |k_i| <= 2N.
struct DiffField {
  std::vector<cxd> c;
  bool empty() const { return c.empty(); }
};

// Uniform sampling grid with q points per axis over [0, period)^dim.
struct SampleGrid {
  int dim = 1;
  int q = 16;
  double period = 1.0;
  int size() const;
  std::vector<double> point(int idx) const;
};

// Smallest grid size >= n with only factors 2, 3, 5.
int fft_friendly(int n);

// Values on a grid -> DFT coefficients c(k) = q^{-dim} sum_j f_j e^{-2i pi k.j/q},
// returned in FFT order (k taken mod q per axis).
std::vector<cxd> grid_dft(const SampleGrid& g, const std::vector<cxd>& values);
// Inverse of grid_dft: FFT-order coefficients -> point values.
std::vector<cxd> grid_idft(const SampleGrid& g, const std::vector<cxd>& coeffs);

// Pick coefficients c(k), |k_i| <= 2N, out of an FFT-order array on grid g.
// Grid and lattice must share the period; the grid needs q > 4N.
DiffField diff_from_fft(const FourierLattice& lat, const SampleGrid& g,
                        const std::vector<cxd>& fft_coeffs);

DiffField diff_from_samples(const FourierLattice& lat, const SampleGrid& g,
                            const std::vector<cxd>& values);

}  // namespace bwh
