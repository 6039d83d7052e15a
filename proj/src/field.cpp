#include "bwh/field.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include "json.hpp"

namespace bwh {

using nlohmann::json;

PeriodicField PeriodicField::zero(const FourierLattice& lat) {
  return PeriodicField{lat, VecC::Zero(lat.flat_size())};
}

PeriodicField PeriodicField::constant(const FourierLattice& lat, double value) {
  auto f = zero(lat);
  f.coeffs[lat.flat(std::vector<int>(lat.dim, 0))] = value;
  return f;
}

PeriodicField PeriodicField::from_samples(const FourierLattice& lat, const SampleGrid& g,
                                          const std::vector<cxd>& values) {
  require(g.dim == lat.dim, "sample grid dimension mismatch");
  require(std::abs(g.period - lat.period) < 1e-12, "sample grid period mismatch");
  auto fc = grid_dft(g, values);
  auto f = zero(lat);
  for (int i = 0; i < lat.flat_size(); ++i) {
    auto m = lat.multi(i);
    int gi = 0;
    for (int a = 0; a < g.dim; ++a) gi = gi * g.q + ((m[a] % g.q) + g.q) % g.q;
    f.coeffs[i] = fc[gi];
  }
  return f;
}

cxd PeriodicField::coeff(const std::vector<int>& m) const {
  return lat.contains(m) ? coeffs[lat.flat(m)] : cxd(0.0);
}

cxd PeriodicField::coeff_at(const std::vector<int>& k, int query_period) const {
  std::vector<int> m(k.size());
  for (size_t a = 0; a < k.size(); ++a) {
    long num = static_cast<long>(k[a]) * lat.period;
    if (num % query_period != 0) return 0.0;
    m[a] = static_cast<int>(num / query_period);
  }
  return coeff(m);
}

cxd PeriodicField::mean() const { return coeff(std::vector<int>(lat.dim, 0)); }

bool PeriodicField::is_real(double rtol) const {
  double scale = std::max(max_abs_coeff(), 1e-300);
  for (int i = 0; i < lat.flat_size(); ++i) {
    auto m = lat.multi(i);
    for (auto& v : m) v = -v;
    if (std::abs(coeffs[i] - std::conj(coeff(m))) > rtol * scale) return false;
  }
  return true;
}

double PeriodicField::max_abs_coeff() const {
  return coeffs.size() ? coeffs.cwiseAbs().maxCoeff() : 0.0;
}

std::vector<cxd> PeriodicField::sample(const SampleGrid& g) const {
  require(g.dim == lat.dim, "sample grid dimension mismatch");
  const double ratio = g.period / lat.period;
  const int r = static_cast<int>(std::lround(ratio));
  require(r >= 1 && std::abs(ratio - r) < 1e-12,
          "sample grid period must be a multiple of the field period");
  std::vector<cxd> fc(g.size(), 0.0);
  for (int i = 0; i < lat.flat_size(); ++i) {
    if (coeffs[i] == 0.0) continue;
    auto m = lat.multi(i);
    int gi = 0;
    for (int a = 0; a < g.dim; ++a) gi = gi * g.q + (((m[a] * r) % g.q) + g.q) % g.q;
    fc[gi] += coeffs[i];
  }
  return grid_idft(g, fc);
}

cxd PeriodicField::eval(const std::vector<double>& y) const {
  cxd s = 0.0;
  for (int i = 0; i < lat.flat_size(); ++i) {
    if (coeffs[i] == 0.0) continue;
    double ph = 0.0;
    for (int a = 0; a < lat.dim; ++a) ph += lat.kappa(i, a) * y[a];
    s += coeffs[i] * std::exp(kI * (kTwoPi * ph));
  }
  return s;
}

void CellMedium::validate(int grid_q) const {
  require(dim == 1 || dim == 2, "medium dimension must be 1 or 2");
  require(adim == 1 || adim == 2, "medium tensor size must be 1 or 2");
  require(static_cast<int>(A.size()) == adim * adim, "A must have adim^2 components");
  require(coercivity > 0.0, "coercivity a0 must be positive");
  for (const auto& f : A) require(f.lat.dim == dim, "A lattice dimension mismatch");
  require(V.lat.dim == dim && U.lat.dim == dim, "V/U lattice dimension mismatch");
  for (int i = 0; i < adim; ++i)
    for (int j = 0; j < adim; ++j) {
      const auto& aij = a(i, j);
      const auto& aji = a(j, i);
      for (int k = 0; k < aij.lat.flat_size(); ++k) {
        auto m = aij.lat.multi(k);
        require(std::abs(aij.coeffs[k] - aji.coeff(m)) <= 1e-12 * (1.0 + aij.max_abs_coeff()),
                "A must be symmetric");
      }
      require(aij.is_real(), "A must be real-valued");
    }
  require(V.is_real() && U.is_real(), "V and U must be real-valued");

  int maxc = cutoff();
  for (const auto& f : A) maxc = std::max(maxc, f.lat.cutoff);
  SampleGrid g{dim, grid_q > 0 ? grid_q : fft_friendly(4 * maxc + 8), 1.0};
  std::vector<std::vector<cxd>> s(A.size());
  for (size_t c = 0; c < A.size(); ++c) s[c] = A[c].sample(g);
  auto vs = V.sample(g);
  auto us = U.sample(g);
  for (int p = 0; p < g.size(); ++p) {
    require(std::isfinite(vs[p].real()) && std::isfinite(us[p].real()), "V/U not bounded");
    MatR a(adim, adim);
    for (int i = 0; i < adim; ++i)
      for (int j = 0; j < adim; ++j) a(i, j) = s[i * adim + j][p].real();
    double mn = adim == 1 ? a(0, 0) : Eigen::SelfAdjointEigenSolver<MatR>(a).eigenvalues()(0);
    if (mn < coercivity * (1.0 - 1e-12))
      throw ConfigError("coercivity violated: min eigenvalue of A(y) is " + std::to_string(mn) +
                        " < a0 = " + std::to_string(coercivity));
  }
}

double CellMedium::max_abs_V() const {
  SampleGrid g{dim, fft_friendly(4 * cutoff() + 8), 1.0};
  double m = 0.0;
  for (auto v : V.sample(g)) m = std::max(m, std::abs(v));
  return m;
}

CellMedium CellMedium::shifted_V(double c) const {
  CellMedium out = *this;
  out.V.coeffs[out.V.lat.flat(std::vector<int>(dim, 0))] += c;
  return out;
}

CellMedium make_medium(int dim, int cutoff, const MatR& A_const, double coercivity) {
  auto lat = build_lattice(dim, cutoff);
  CellMedium m;
  m.dim = dim;
  m.adim = static_cast<int>(A_const.rows());
  for (int i = 0; i < m.adim; ++i)
    for (int j = 0; j < m.adim; ++j) m.A.push_back(PeriodicField::constant(lat, A_const(i, j)));
  m.V = PeriodicField::zero(lat);
  m.U = PeriodicField::zero(lat);
  m.coercivity = coercivity;
  return m;
}

CellMedium free_medium(int dim, int cutoff) {
  return make_medium(dim, cutoff, MatR::Identity(dim, dim), 1.0);
}

CellMedium mathieu_medium(int dim, int cutoff, double v_amp) {
  auto m = free_medium(dim, cutoff);
  for (int a = 0; a < dim; ++a) {
    std::vector<int> e(dim, 0);
    e[a] = 1;
    m.V.coeffs[m.V.lat.flat(e)] += 0.5 * v_amp;
    e[a] = -1;
    m.V.coeffs[m.V.lat.flat(e)] += 0.5 * v_amp;
  }
  return m;
}

namespace {

PeriodicField parse_terms(const FourierLattice& lat, const json& terms) {
  auto f = PeriodicField::zero(lat);
  for (const auto& t : terms) {
    std::vector<int> m = t.at("m").get<std::vector<int>>();
    require(static_cast<int>(m.size()) == lat.dim, "fourier term has wrong index dimension");
    require(lat.contains(m), "fourier term outside the medium cutoff");
    f.coeffs[lat.flat(m)] += cxd(t.value("re", 0.0), t.value("im", 0.0));
  }
  return f;
}

PeriodicField parse_grid(const FourierLattice& lat, const json& values) {
  auto v = values.get<std::vector<double>>();
  int g = static_cast<int>(std::lround(std::pow(static_cast<double>(v.size()), 1.0 / lat.dim)));
  int total = lat.dim == 1 ? g : g * g;
  require(total == static_cast<int>(v.size()), "grid data size is not a perfect power");
  require(g >= 2 * lat.side(), "grid data must oversample the cutoff by 2x (need >= 2(2N+1) points per axis)");
  SampleGrid sg{lat.dim, g, 1.0};
  std::vector<cxd> cv(v.begin(), v.end());
  return PeriodicField::from_samples(lat, sg, cv);
}

PeriodicField parse_scalar(const FourierLattice& lat, const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  const json& data = spec.at("data");
  if (kind == "constant") return PeriodicField::constant(lat, data.get<double>());
  if (kind == "fourier") return parse_terms(lat, data);
  if (kind == "grid") return parse_grid(lat, data);
  throw ConfigError("unknown field kind '" + kind + "'");
}

std::vector<PeriodicField> parse_tensor(const FourierLattice& lat, int adim, const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  const json& data = spec.at("data");
  std::vector<PeriodicField> out(adim * adim, PeriodicField::zero(lat));
  auto scalar_times_identity = [&](const PeriodicField& s) {
    for (int i = 0; i < adim; ++i) out[i * adim + i] = s;
  };
  if (kind == "constant") {
    if (data.is_number()) {
      scalar_times_identity(PeriodicField::constant(lat, data.get<double>()));
    } else {
      auto rows = data.get<std::vector<std::vector<double>>>();
      require(static_cast<int>(rows.size()) == adim, "constant A has wrong shape");
      for (int i = 0; i < adim; ++i) {
        require(static_cast<int>(rows[i].size()) == adim, "constant A has wrong shape");
        for (int j = 0; j < adim; ++j) out[i * adim + j] = PeriodicField::constant(lat, rows[i][j]);
      }
    }
    return out;
  }
  require(kind == "fourier" || kind == "grid", "unknown field kind '" + kind + "'");
  // Either a scalar payload (A = a(y) I) or a list of {i, j, values|terms} components.
  bool components = data.is_array() && !data.empty() && data[0].is_object() && data[0].contains("i");
  if (!components) {
    scalar_times_identity(kind == "fourier" ? parse_terms(lat, data) : parse_grid(lat, data));
    return out;
  }
  for (const auto& c : data) {
    int i = c.at("i").get<int>(), j = c.at("j").get<int>();
    require(i >= 0 && i < adim && j >= 0 && j < adim, "A component index out of range");
    auto f = kind == "fourier" ? parse_terms(lat, c.at("terms")) : parse_grid(lat, c.at("values"));
    out[i * adim + j] = f;
    out[j * adim + i] = f;
  }
  return out;
}

}  // namespace

CellMedium medium_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("medium JSON parse error: ") + e.what());
  }
  try {
    CellMedium m;
    m.dim = doc.at("dim").get<int>();
    m.adim = doc.value("adim", m.dim);
    auto lat = build_lattice(m.dim, doc.at("cutoff").get<int>());
    m.A = parse_tensor(lat, m.adim, doc.at("A"));
    m.V = doc.contains("V") ? parse_scalar(lat, doc["V"]) : PeriodicField::zero(lat);
    m.U = doc.contains("U") ? parse_scalar(lat, doc["U"]) : PeriodicField::zero(lat);
    m.coercivity = doc.value("coercivity", 1e-6);
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("medium JSON schema error: ") + e.what());
  }
}

CellMedium load_medium(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open medium file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return medium_from_json_text(ss.str());
}

}  // namespace bwh
