#pragma once

#include <string>
#include <vector>

#include "bwh/common.hpp"
#include "bwh/lattice.hpp"

namespace bwh {

// Scalar function on [0, period)^dim stored as Fourier coefficients.
struct PeriodicField {
  FourierLattice lat;
  VecC coeffs;

  static PeriodicField zero(const FourierLattice& lat);
  static PeriodicField constant(const FourierLattice& lat, double value);
  // DFT projection of samples on g onto lat (modes outside lat are dropped).
  static PeriodicField from_samples(const FourierLattice& lat, const SampleGrid& g,
                                    const std::vector<cxd>& values);

  // Coefficient of the mode with wavevector k/period_of_query; zero when the
  // mode does not exist on this field's lattice.
  cxd coeff(const std::vector<int>& m) const;
  cxd coeff_at(const std::vector<int>& k, int query_period) const;
  cxd mean() const;
  bool is_real(double rtol = 1e-12) const;
  double max_abs_coeff() const;

  // Exact point values on g. The grid period must be a multiple of the field's.
  std::vector<cxd> sample(const SampleGrid& g) const;
  cxd eval(const std::vector<double>& y) const;
};

// Coefficient fields of the cell operator. A is adim x adim (adim is the
// physical dimension; it differs from dim only for quasi-periodic media).
struct CellMedium {
  int dim = 1;
  int adim = 1;
  std::vector<PeriodicField> A;  // row-major adim*adim
  PeriodicField V;
  PeriodicField U;
  double coercivity = 1.0;

  const PeriodicField& a(int i, int j) const { return A[i * adim + j]; }
  int cutoff() const { return V.lat.cutoff; }
  FourierLattice field_lattice() const { return V.lat; }

  // Symmetry, reality, coercivity and boundedness on a validation grid.
  void validate(int grid_q = 0) const;
  // Largest sampled |V| (used for time-step heuristics).
  double max_abs_V() const;
  CellMedium shifted_V(double c) const;
};

CellMedium make_medium(int dim, int cutoff, const MatR& A_const, double coercivity);
// A = I, V = cos(2 pi y_1) (plus cos(2 pi y_2) in 2D), U = 0.
CellMedium mathieu_medium(int dim, int cutoff, double v_amp = 1.0);
CellMedium free_medium(int dim, int cutoff);

// Parse the medium JSON document (see README for the schema).
CellMedium medium_from_json_text(const std::string& text);
CellMedium load_medium(const std::string& path);

}  // namespace bwh
