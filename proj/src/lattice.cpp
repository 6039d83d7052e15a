#include "bwh/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <tuple>

#include <map>
#include <mutex>

namespace bwh {

int FourierLattice::flat_size() const {
  int s = 1;
  for (int a = 0; a < dim; ++a) s *= side();
  return s;
}

int FourierLattice::flat(const std::vector<int>& m) const {
  int idx = 0;
  for (int a = 0; a < dim; ++a) idx = idx * side() + (m[a] + cutoff);
  return idx;
}

std::vector<int> FourierLattice::multi(int idx) const {
  std::vector<int> m(dim);
  for (int a = dim - 1; a >= 0; --a) {
    m[a] = idx % side() - cutoff;
    idx /= side();
  }
  return m;
}

bool FourierLattice::contains(const std::vector<int>& m) const {
  if (static_cast<int>(m.size()) != dim) return false;
  for (int v : m)
    if (v < -cutoff || v > cutoff) return false;
  return true;
}

double FourierLattice::kappa(int idx, int a) const {
  int stride = 1;
  for (int b = a + 1; b < dim; ++b) stride *= side();
  int m = (idx / stride) % side() - cutoff;
  return static_cast<double>(m) / period;
}

FourierLattice build_lattice(int dim, int cutoff, int period) {
  require(dim == 1 || dim == 2, "lattice dimension must be 1 or 2, got " + std::to_string(dim));
  require(cutoff >= 1, "lattice cutoff must be >= 1, got " + std::to_string(cutoff));
  require(period >= 1, "supercell period must be >= 1");
  return FourierLattice{dim, cutoff, period};
}

DiffIndex::DiffIndex(const FourierLattice& lat)
    : dim_(lat.dim), cutoff_(lat.cutoff), side_(4 * lat.cutoff + 1) {
  size_ = 1;
  for (int a = 0; a < dim_; ++a) size_ *= side_;
  mr_.resize(lat.flat_size());
  for (int i = 0; i < lat.flat_size(); ++i) {
    auto m = lat.multi(i);
    mr_[i] = {m[0], dim_ > 1 ? m[1] : 0};
  }
}

std::vector<int> DiffIndex::multi(int idx) const {
  std::vector<int> k(dim_);
  for (int a = dim_ - 1; a >= 0; --a) {
    k[a] = idx % side_ - 2 * cutoff_;
    idx /= side_;
  }
  return k;
}

int SampleGrid::size() const {
  int s = 1;
  for (int a = 0; a < dim; ++a) s *= q;
  return s;
}

std::vector<double> SampleGrid::point(int idx) const {
  std::vector<double> y(dim);
  for (int a = dim - 1; a >= 0; --a) {
    y[a] = period * static_cast<double>(idx % q) / q;
    idx /= q;
  }
  return y;
}

int fft_friendly(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

namespace {

struct PlanKey {
  int dim, q, sign;
  bool operator<(const PlanKey& o) const {
    return std::tie(dim, q, sign) < std::tie(o.dim, o.q, o.sign);
  }
};

std::mutex g_plan_mutex;
std::map<PlanKey, fftw_plan> g_plans;

void run_fft(int dim, int q, int sign, std::vector<cxd>& data) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = g_plans.find({dim, q, sign});
    if (it == g_plans.end()) {
      std::vector<cxd> scratch(data.size());
      auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
      plan = dim == 1 ? fftw_plan_dft_1d(q, p, p, sign, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(q, q, p, p, sign, FFTW_ESTIMATE);
      g_plans[{dim, q, sign}] = plan;
    } else {
      plan = it->second;
    }
  }
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

std::vector<cxd> grid_dft(const SampleGrid& g, const std::vector<cxd>& values) {
  require(static_cast<int>(values.size()) == g.size(), "grid_dft: size mismatch");
  std::vector<cxd> out = values;
  run_fft(g.dim, g.q, FFTW_FORWARD, out);
  const double scale = 1.0 / g.size();
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<cxd> grid_idft(const SampleGrid& g, const std::vector<cxd>& coeffs) {
  require(static_cast<int>(coeffs.size()) == g.size(), "grid_idft: size mismatch");
  std::vector<cxd> out = coeffs;
  run_fft(g.dim, g.q, FFTW_BACKWARD, out);
  return out;
}

DiffField diff_from_fft(const FourierLattice& lat, const SampleGrid& g,
                        const std::vector<cxd>& fft_coeffs) {
  require(g.dim == lat.dim, "grid/lattice dimension mismatch");
  require(g.q > 4 * lat.cutoff, "sampling grid too coarse for the lattice (need q > 4N)");
  DiffIndex di(lat);
  DiffField f;
  f.c.resize(di.size());
  for (int i = 0; i < di.size(); ++i) {
    auto k = di.multi(i);
    int gi = 0;
    for (int a = 0; a < g.dim; ++a) gi = gi * g.q + ((k[a] % g.q) + g.q) % g.q;
    f.c[i] = fft_coeffs[gi];
  }
  return f;
}

DiffField diff_from_samples(const FourierLattice& lat, const SampleGrid& g,
                            const std::vector<cxd>& values) {
  return diff_from_fft(lat, g, grid_dft(g, values));
}

}  // namespace bwh
