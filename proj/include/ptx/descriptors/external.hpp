#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/io/feature_cache_format.hpp"

namespace ptx {

/// Ingests precomputed vectors (Inception-V3 activations, LETRIST, ...)
/// stored in the feature-cache format.
inline std::vector<std::pair<std::string, FeatureVector>> load_external_features(
    const std::filesystem::path& path, DescriptorId id, std::size_t expected_dim,
    const std::string& external_name = {}) {
  const auto file = read_feature_cache<SchemaError>(path);
  if (file.dim != expected_dim)
    throw SchemaError(path.string() + ": dimension " + std::to_string(file.dim) + ", expected " +
                      std::to_string(expected_dim));
  std::set<std::string> seen;
  std::vector<std::pair<std::string, FeatureVector>> out;
  for (const auto& row : file.rows) {
    if (!seen.insert(row.sample_id).second) throw SchemaError("duplicate sample_id " + row.sample_id);
    out.emplace_back(row.sample_id, FeatureVector{id, external_name, row.values});
  }
  return out;
}

}  // namespace ptx
