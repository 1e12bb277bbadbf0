#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ptx/dataset/feature_matrix.hpp"
#include "ptx/dataset/manifest.hpp"
#include "ptx/descriptors/descriptors.hpp"
#include "ptx/io/feature_cache_format.hpp"
#include "ptx/parallel.hpp"

namespace ptx {

struct ExtractStats {
  std::size_t decoded = 0;     // images read and described in this run
  std::size_t cache_hits = 0;  // rows served from the cache
};

inline std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir, const DescriptorConfig& cfg) {
  return cache_dir / (cfg.name() + "-" + cfg.digest() + ".features");
}

/// Loads a cache file and checks it against the descriptor configuration.
inline std::map<std::string, std::vector<double>> read_descriptor_cache(const std::filesystem::path& path,
                                                                        const DescriptorConfig& cfg) {
  std::map<std::string, std::vector<double>> out;
  if (!std::filesystem::exists(path)) return out;
  const auto file = read_feature_cache<CacheIntegrityError>(path);
  if (file.descriptor_id != cfg.name() || file.param_digest != cfg.digest())
    throw CacheIntegrityError(path.string() + ": header does not match " + cfg.name() + "/" + cfg.digest());
  if (file.dim != cfg.dim())
    throw CacheIntegrityError(path.string() + ": dimension " + std::to_string(file.dim) + ", expected " +
                              std::to_string(cfg.dim()));
  for (const auto& r : file.rows)
    if (!out.emplace(r.sample_id, r.values).second)
      throw CacheIntegrityError(path.string() + ": duplicate sample " + r.sample_id);
  return out;
}

namespace detail {

inline FeatureMatrix assemble(const std::vector<Sample>& samples, const DescriptorConfig& cfg,
                              const std::map<std::string, std::vector<double>>& values) {
  FeatureMatrix m;
  m.descriptor_set = {cfg.name()};
  m.dim = cfg.dim();
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    auto it = values.find(s.sample_id);
    if (it == values.end()) {
      missing.push_back(s.sample_id + ": no " + cfg.name() + " vector");
      continue;
    }
    if (it->second.size() != m.dim)
      throw CacheIntegrityError(cfg.name() + " vector for " + s.sample_id + " has the wrong dimension");
    m.rows.push_back({s.sample_id, it->second, s.label, s.split, false});
  }
  if (!missing.empty()) throw ExtractionError(missing);
  return m;
}

}  // namespace detail

/// One descriptor over every sample. Vectors are cached per
/// (descriptor, parameter digest) under `cache_dir`; cached rows are reused
/// verbatim and only missing samples are decoded. Failures are collected and
/// reported together.
inline FeatureMatrix extract_features(const std::vector<Sample>& samples, const DescriptorConfig& cfg,
                                      const std::filesystem::path& cache_dir, ExtractStats* stats = nullptr,
                                      unsigned workers = 1) {
  ExtractStats local;
  if (cfg.is_external()) {
    std::map<std::string, std::vector<double>> values;
    for (auto& [id, fv] : load_external_features(cfg.external_path, cfg.id, cfg.dim(), cfg.external_name))
      values.emplace(id, std::move(fv.values));
    local.cache_hits = samples.size();
    if (stats) *stats = local;
    return detail::assemble(samples, cfg, values);
  }

  const auto path = feature_cache_path(cache_dir, cfg);
  auto values = read_descriptor_cache(path, cfg);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (values.count(samples[i].sample_id))
      ++local.cache_hits;
    else
      todo.push_back(i);

  if (!todo.empty()) {
    std::vector<std::optional<std::vector<double>>> computed(todo.size());
    std::vector<std::string> failures;
    std::mutex mu;
    parallel_for(todo.size(), workers, [&](std::size_t k) {
      const auto& s = samples[todo[k]];
      try {
        computed[k] = compute_descriptor(cfg, load_gray(s.image_path)).values;
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        failures.push_back(s.sample_id + " (" + s.image_path.string() + "): " + e.what());
      }
    });
    if (!failures.empty()) {
      std::sort(failures.begin(), failures.end());
      throw ExtractionError(failures);
    }
    for (std::size_t k = 0; k < todo.size(); ++k) values[samples[todo[k]].sample_id] = std::move(*computed[k]);
    local.decoded = todo.size();

    FeatureCacheFile file;
    file.descriptor_id = cfg.name();
    file.dim = cfg.dim();
    file.param_digest = cfg.digest();
    for (const auto& [id, v] : values) file.rows.push_back({id, false, v});
    write_feature_cache_atomic(path, file);
  }
  if (stats) *stats = local;
  return detail::assemble(samples, cfg, values);
}

/// Writes a matrix (typically resampled) in the cache format with the
/// origin column.
inline void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m, const std::string& digest) {
  FeatureCacheFile file;
  file.descriptor_id = m.set_name();
  file.dim = m.dim;
  file.param_digest = digest;
  file.has_origin = true;
  for (const auto& r : m.rows) file.rows.push_back({r.sample_id, r.synthetic, r.values});
  write_feature_cache_atomic(path, file);
}

}  // namespace ptx
