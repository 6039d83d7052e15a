#include "bwh/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bwh {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const json& cfg) { return fnv1a_hex(cfg.dump()); }

std::string stamp_csv(const std::string& csv, const RunStamp& stamp) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << line;
    if (header)
      out << ",config_hash,seed\n";
    else
      out << "," << stamp.config_hash << "," << stamp.seed << "\n";
    header = false;
  }
  return out.str();
}

json stamp_json(json j, const RunStamp& stamp) {
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write " + path.string());
  os << content;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), "cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

json to_json(const VecR& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const MatR& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(r);
  }
  return a;
}

json to_json(const MatC& m) {
  return {{"re", to_json(MatR(m.real()))}, {"im", to_json(MatR(m.imag()))}};
}

VecR vec_from_json(const json& j) {
  require(j.is_array(), "expected a numeric array");
  VecR v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

MatR mat_from_json(const json& j) {
  require(j.is_array() && !j.empty() && j[0].is_array(), "expected a nested numeric array");
  MatR m(j.size(), j[0].size());
  for (size_t i = 0; i < j.size(); ++i) {
    require(j[i].size() == j[0].size(), "ragged matrix");
    for (size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

MatC cmat_from_json(const json& j) {
  if (j.is_object()) {
    MatR re = mat_from_json(j.at("re"));
    MatR im = j.contains("im") ? mat_from_json(j.at("im")) : MatR::Zero(re.rows(), re.cols());
    require(re.rows() == im.rows() && re.cols() == im.cols(), "re and im parts differ in shape");
    MatC m(re.rows(), re.cols());
    m.real() = re;
    m.imag() = im;
    return m;
  }
  return mat_from_json(j).cast<cxd>();
}

namespace {

void add_mode(PeriodicField& f, const std::vector<int>& k, cxd c) {
  require(static_cast<int>(k.size()) == f.lat.dim, "mode has the wrong dimension");
  require(f.lat.contains(k), "mode lies outside the field cutoff");
  std::vector<int> mk = k;
  for (auto& v : mk) v = -v;
  if (mk == k) {
    require(std::abs(c.imag()) == 0.0, "zero mode coefficient must be real");
    f.coeffs(f.lat.flat(k)) += c;
    return;
  }
  f.coeffs(f.lat.flat(k)) += c;
  f.coeffs(f.lat.flat(mk)) += std::conj(c);
}

}  // namespace

CellMedium medium_from_json(const json& j) {
  if (!j.contains("base")) return medium_from_json_text(j.dump());
  try {
    const int dim = j.value("dim", 1);
    const int cutoff = j.value("cutoff", 2);
    require(dim >= 1 && dim <= 3, "medium dim must be 1, 2 or 3");
    const std::string base = j.at("base").get<std::string>();
    CellMedium m;
    if (base == "mathieu") {
      m = mathieu_medium(dim, cutoff, j.value("v_amp", 1.0));
    } else if (base == "free") {
      m = free_medium(dim, cutoff);
    } else if (base == "constant") {
      MatR A = j.contains("A_const") ? mat_from_json(j.at("A_const")) : MatR::Identity(dim, dim);
      require(A.rows() == dim && A.cols() == dim, "A_const has the wrong size");
      m = make_medium(dim, cutoff, A, j.value("coercivity", 1.0));
    } else {
      throw ConfigError("unknown medium base '" + base + "'");
    }
    if (j.contains("coercivity")) m.coercivity = j.at("coercivity").get<double>();
    for (const auto& md : j.value("modes", json::array())) {
      const std::string field = md.at("field").get<std::string>();
      const std::vector<int> k = md.at("k").get<std::vector<int>>();
      const auto c = md.at("c").get<std::vector<double>>();
      require(c.size() == 2, "mode coefficient must be [re, im]");
      const cxd v(c[0], c[1]);
      if (field == "V") {
        add_mode(m.V, k, v);
      } else if (field == "U") {
        add_mode(m.U, k, v);
      } else if (field == "A") {
        const int a = md.at("i").get<int>(), b = md.at("j").get<int>();
        require(a >= 0 && b >= 0 && a < m.adim && b < m.adim, "A entry out of range");
        add_mode(m.A[a * m.adim + b], k, v);
        if (a != b) add_mode(m.A[b * m.adim + a], k, v);
      } else {
        throw ConfigError("unknown field '" + field + "' in medium modes");
      }
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid medium: ") + e.what());
  }
}

DeformationConfig deformation_from_json(const json& j, int dim, std::uint64_t default_seed) {
  try {
    const SystemKind kind = system_kind_from_string(j.value("kind", std::string("cyclic_shift")));
    const int p = j.value("p", 2);
    const std::uint64_t seed = j.value("seed", default_seed);
    const auto probs = j.value("probs", std::vector<double>{});
    DynamicalSystem sys = make_dynamical_system(kind, dim, p, probs, seed);
    BumpParams bp;
    bp.profile = profile_from_string(j.value("profile", std::string("poly")));
    bp.amplitudes = j.value("amplitudes", bp.amplitudes);
    if (j.contains("direction")) {
      bp.direction = vec_from_json(j.at("direction"));
      require(bp.direction.size() == dim, "bump direction has the wrong dimension");
    }
    Omega w;
    if (j.contains("omega_k")) {
      w.k = j.at("omega_k").get<std::vector<long long>>();
      require(static_cast<int>(w.k.size()) == dim, "omega_k has the wrong dimension");
    } else {
      w = sys.sample(j.value("sample", std::uint64_t{0}));
    }
    return {BumpDisplacement(sys, bp, w), j.value("eta", 0.0)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid deformation: ") + e.what());
  }
}

}  // namespace bwh
