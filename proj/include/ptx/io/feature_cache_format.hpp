#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ptx/error.hpp"

namespace ptx {

/// In-memory form of one feature-cache file.
///
///   descriptor_id dim n_rows param_digest [origin]
///   sample_id [original|synthetic] v1 ... v_dim
///
/// The origin column is present only when the header carries the trailing
/// `origin` token (resampled matrices).
struct FeatureCacheFile {
  std::string descriptor_id;
  std::size_t dim = 0;
  std::string param_digest;
  bool has_origin = false;
  struct Row {
    std::string sample_id;
    bool synthetic = false;
    std::vector<double> values;
  };
  std::vector<Row> rows;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_feature_cache(std::ostream& out, const FeatureCacheFile& f) {
  out << f.descriptor_id << ' ' << f.dim << ' ' << f.rows.size() << ' ' << f.param_digest;
  if (f.has_origin) out << " origin";
  out << '\n';
  for (const auto& r : f.rows) {
    if (r.values.size() != f.dim) throw CacheIntegrityError("row dimension differs from header");
    out << r.sample_id;
    if (f.has_origin) out << (r.synthetic ? " synthetic" : " original");
    for (double v : r.values) out << ' ' << format_real(v);
    out << '\n';
  }
}

/// Writes to a temporary sibling and renames it into place.
inline void write_feature_cache_atomic(const std::filesystem::path& path, const FeatureCacheFile& f) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter++) + "." + std::to_string(reinterpret_cast<std::uintptr_t>(&f));
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    write_feature_cache(out, f);
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Parses a cache file. Structural problems raise `Err` so callers can
/// distinguish poisoned caches from malformed external inputs.
template <typename Err = CacheIntegrityError>
FeatureCacheFile read_feature_cache(std::istream& in, const std::string& what = "feature cache") {
  FeatureCacheFile f;
  std::string line;
  if (!std::getline(in, line)) throw Err(what + ": missing header");
  std::size_t n_rows = 0;
  {
    std::istringstream h(line);
    if (!(h >> f.descriptor_id >> f.dim >> n_rows >> f.param_digest)) throw Err(what + ": malformed header");
    std::string tok;
    if (h >> tok) {
      if (tok != "origin") throw Err(what + ": unknown header token " + tok);
      f.has_origin = true;
    }
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream s(line);
    FeatureCacheFile::Row row;
    s >> row.sample_id;
    if (f.has_origin) {
      std::string origin;
      s >> origin;
      if (origin != "original" && origin != "synthetic") throw Err(what + ": bad origin on line " + std::to_string(lineno));
      row.synthetic = origin == "synthetic";
    }
    std::string tok;
    while (s >> tok) {
      try {
        std::size_t used = 0;
        row.values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Err(what + ": non-numeric value on line " + std::to_string(lineno));
      }
    }
    if (row.values.size() != f.dim)
      throw Err(what + ": line " + std::to_string(lineno) + " has " + std::to_string(row.values.size()) +
                " values, header says " + std::to_string(f.dim));
    f.rows.push_back(std::move(row));
  }
  if (f.rows.size() != n_rows) throw Err(what + ": row count differs from header");
  return f;
}

template <typename Err = CacheIntegrityError>
FeatureCacheFile read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_feature_cache<Err>(in, path.string());
}

}  // namespace ptx
