#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "bwh/assembly.hpp"
#include "bwh/field.hpp"
#include "bwh/stochastic.hpp"

namespace bwh {

using json = nlohmann::json;

// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// Digest of the canonical (key-sorted, compact) dump of a resolved config.
std::string config_hash(const json& cfg);

struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Appends config_hash and seed columns to every row of a CSV document.
std::string stamp_csv(const std::string& csv, const RunStamp& stamp);
json stamp_json(json j, const RunStamp& stamp);

void write_text(const std::filesystem::path& path, const std::string& content);
json read_json(const std::filesystem::path& path);

json to_json(const VecR& v);
json to_json(const MatR& m);
json to_json(const MatC& m);  // {"re": [[...]], "im": [[...]]}
VecR vec_from_json(const json& j);
MatR mat_from_json(const json& j);
MatC cmat_from_json(const json& j);

// Medium document: the field format {dim, cutoff, A, V, U, coercivity} of
// medium_from_json_text, or the shorthand {dim, cutoff, base: mathieu|free|constant,
// v_amp, A_const, coercivity, modes: [{field: A|V|U, i, j, k: [...], c: [re, im]}]}.
// Each shorthand mode also sets its conjugate at -k (and the transposed entry
// for A) so fields stay real and symmetric.
CellMedium medium_from_json(const json& j);

// Deformation file: {kind, p, seed, eta, profile, amplitudes, direction, probs,
// omega_k | sample}.
struct DeformationConfig {
  BumpDisplacement z;
  double eta = 0.0;
};
DeformationConfig deformation_from_json(const json& j, int dim, std::uint64_t default_seed);

}  // namespace bwh
