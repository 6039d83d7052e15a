#pragma once

#include <vector>

#include "bwh/common.hpp"
#include "bwh/field.hpp"
#include "bwh/lattice.hpp"

namespace bwh {

struct BlochMatrix {
  FourierLattice lat;
  VecR theta;
  MatC H;
  MatC M;  // empty when the mass is the identity
  bool has_mass() const { return M.size() > 0; }
  double hermitian_defect() const;  // ||H - H^*||_F / ||H||_F
};

// Direct Fourier-Galerkin matrix of -(div + 2i pi theta) A (grad + 2i pi theta) + V.
// The lattice period may exceed 1 (supercell view of a unit-cell medium).
BlochMatrix assemble_periodic(const CellMedium& medium, const VecR& theta, const FourierLattice& lat);
// dH/dtheta_k for the periodic problem.
BlochMatrix dtheta_operator(const CellMedium& medium, const VecR& theta, const FourierLattice& lat, int k);

// Sesquilinear cell form in "pulled back" coordinates:
//   h(f,g) = int A (R grad f + 2i pi theta f).conj(R grad g + 2i pi theta g) J + V f conj(g) J
//   m(f,g) = int f conj(g) J
// stored through the theta-independent fields K = R^T A R J, L = A R J, AJ = A J,
// VJ, UJ and J. Mode m has wavevector kappa(m) (m/p on a supercell, Lambda^T m
// for quasi-periodic media).
struct CellForm {
  FourierLattice lat;
  int n = 1;
  std::vector<VecR> kappa;
  std::vector<DiffField> K, L, AJ;
  DiffField VJ, UJ, J;

  bool has_mass() const { return !J.empty(); }
  int size() const { return lat.flat_size(); }

  MatC toeplitz(const DiffField& f) const;
  VecC apply(const DiffField& f, const VecC& x) const;
  // g^* T[f] x
  cxd pair(const DiffField& f, const VecC& g, const VecC& x) const;
  // Component a of the plain gradient: 2i pi kappa_a x.
  VecC grad(const VecC& x, int a) const;

  MatC stiffness(const VecR& theta) const;
  MatC mass() const;
  MatC dtheta(const VecR& theta, int k) const;
  MatC dtheta2(int k, int l) const;
  BlochMatrix bloch(const VecR& theta) const;
};

// Exact coefficient route for a periodic medium (no sampling).
CellForm form_from_medium(const CellMedium& medium, const FourierLattice& lat);

// Pointwise fields sampled on g: A (n*n), R (n*n), J, V, U. Empty R means identity;
// empty J means unit weight (and no mass matrix).
struct SampledFields {
  SampleGrid grid;
  int n = 1;
  std::vector<std::vector<double>> A, R;
  std::vector<double> J, V, U;
};
CellForm form_from_samples(const FourierLattice& lat, const std::vector<VecR>& kappa,
                           const SampledFields& s);

// Displacement field Z of a deformation y -> y + eta Z(y), periodic with period().
class Displacement {
 public:
  virtual ~Displacement() = default;
  virtual int dim() const = 0;
  virtual int period() const = 0;
  // grad(i, j) = dZ_i / dy_j
  virtual void eval(const std::vector<double>& y, VecR& z, MatR& grad) const = 0;
};

// Unit-cell quadrature grid size used by deformed and first-order assemblies.
int default_cell_grid(int cutoff, const CellMedium& medium);

struct DeformedOptions {
  int cell_q = 0;          // unit-cell grid size (0: default_cell_grid)
  double nu_floor = 1e-3;  // smallest admissible det(grad Phi)
};

// Supercell form of the deformed problem on [0,p)^n, p = lat.period.
CellForm deformed_form(const CellMedium& medium, const Displacement& z, double eta,
                       const FourierLattice& lat, const DeformedOptions& opt = {});
BlochMatrix assemble_supercell_deformed(const CellMedium& medium, const Displacement& z, double eta,
                                        const VecR& theta, const FourierLattice& lat,
                                        const DeformedOptions& opt = {});

// d/deta at eta = 0 of the deformed form, with the displacement gradient replaced
// by its expectation EgradZ (n*n samples on the unit-cell grid g).
CellForm first_order_form(const CellMedium& medium, const FourierLattice& lat, const SampleGrid& g,
                          const std::vector<std::vector<double>>& EgradZ);

struct QuasiPeriodicSpec {
  int m = 1;                         // torus dimension
  MatR Lambda;                       // m x n frequency matrix
  std::vector<PeriodicField> Bper;   // n*n on [0,1)^m; empty means identity
};

CellForm quasiperiodic_form(const QuasiPeriodicSpec& spec, const CellMedium& medium_m,
                            const FourierLattice& lat);
BlochMatrix assemble_quasiperiodic(const QuasiPeriodicSpec& spec, const CellMedium& medium_m,
                                   const VecR& theta, const FourierLattice& lat);

enum class Finiteness { yes, no, inconclusive };

struct FrequencyCheck {
  bool positive = false;          // det(Lambda Lambda^T) > 0
  double gram_det = 0.0;
  bool independent = true;        // no integer relation found within the radius
  Finiteness finite_set = Finiteness::inconclusive;
  double radius_needed = 0.0;     // |k| bound implied by the positive case
  std::vector<std::vector<int>> witnesses;  // k with |Lambda^T k| <= d
};

FrequencyCheck check_frequency_matrix(const MatR& Lambda, double d, int search_radius);

}  // namespace bwh
