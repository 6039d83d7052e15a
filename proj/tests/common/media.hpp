#pragma once

#include <vector>

#include "bwh/field.hpp"
#include "bwh/stochastic.hpp"

namespace bwh::testing {

inline void add_real_mode(PeriodicField& f, std::vector<int> m, cxd v) {
  f.coeffs(f.lat.flat(m)) += v;
  for (auto& x : m) x = -x;
  f.coeffs(f.lat.flat(m)) += std::conj(v);
}

// 1D Mathieu cell with extra A, V, U modes that break the reflection symmetry,
// so the first-order effective corrections do not vanish.
inline CellMedium asymmetric_medium() {
  CellMedium m = mathieu_medium(1, 2, 1.0);
  add_real_mode(m.V, {2}, cxd(0.0, 0.3));
  add_real_mode(m.A[0], {1}, cxd(0.1, 0.05));
  add_real_mode(m.U, {1}, cxd(0.2, 0.1));
  m.coercivity = 0.5;
  m.validate();
  return m;
}

// Cyclic p = 2 bump realized at the origin of the sample space.
inline BumpDisplacement cyclic_bump(int dim, Profile profile, std::vector<double> amplitudes) {
  DynamicalSystem sys = make_dynamical_system(SystemKind::cyclic_shift, dim, 2, {}, 0);
  BumpParams bp;
  bp.profile = profile;
  bp.amplitudes = std::move(amplitudes);
  Omega w;
  w.k.assign(dim, 0);
  return BumpDisplacement(sys, bp, w);
}

}  // namespace bwh::testing
