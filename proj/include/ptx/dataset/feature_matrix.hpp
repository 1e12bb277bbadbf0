#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ptx/dataset/manifest.hpp"
#include "ptx/error.hpp"

namespace ptx {

struct FeatureRow {
  std::string sample_id;
  std::vector<double> values;
  std::string label;
  Split split = Split::Unassigned;
  bool synthetic = false;

  bool operator==(const FeatureRow&) const = default;
};

/// Rows of one (possibly fused) descriptor set, in manifest order.
struct FeatureMatrix {
  std::vector<std::string> descriptor_set;
  std::size_t dim = 0;
  std::vector<FeatureRow> rows;

  std::string set_name() const {
    std::string s;
    for (const auto& d : descriptor_set) s += (s.empty() ? "" : "+") + d;
    return s;
  }

  FeatureMatrix subset(Split split) const {
    FeatureMatrix m{descriptor_set, dim, {}};
    for (const auto& r : rows)
      if (r.split == split) m.rows.push_back(r);
    return m;
  }

  /// Distinct labels, sorted.
  std::vector<std::string> labels() const {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.label);
    return {s.begin(), s.end()};
  }

  std::map<std::string, std::size_t> label_counts() const {
    std::map<std::string, std::size_t> c;
    for (const auto& r : rows) ++c[r.label];
    return c;
  }

  void check() const {
    for (const auto& r : rows)
      if (r.values.size() != dim) throw DimensionError("row " + r.sample_id + " has the wrong dimension");
  }

  bool operator==(const FeatureMatrix&) const = default;
};

/// Row-wise concatenation in the given order.
inline FeatureMatrix early_fuse(const std::vector<FeatureMatrix>& parts) {
  if (parts.empty()) throw ParameterError("early_fuse needs at least one matrix");
  FeatureMatrix out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const auto& m = parts[p];
    if (m.rows.size() != out.rows.size())
      throw AlignmentError("matrices cover different sample counts");
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      auto& dst = out.rows[i];
      const auto& src = m.rows[i];
      if (src.sample_id != dst.sample_id)
        throw AlignmentError("sample order differs at row " + std::to_string(i) + ": " + dst.sample_id + " vs " +
                             src.sample_id);
      if (src.label != dst.label || src.split != dst.split)
        throw AlignmentError("label or split differs for " + src.sample_id);
      dst.values.insert(dst.values.end(), src.values.begin(), src.values.end());
    }
    out.descriptor_set.insert(out.descriptor_set.end(), m.descriptor_set.begin(), m.descriptor_set.end());
    out.dim += m.dim;
  }
  return out;
}

/// All descriptor subsets of the requested sizes, each sorted by name,
/// ordered by size and then lexicographically. Sizes other than 2 and 3
/// require `allow_any_size`.
inline std::vector<std::vector<std::string>> enumerate_fusion_sets(std::vector<std::string> names,
                                                                   std::vector<int> sizes = {2, 3},
                                                                   bool allow_any_size = false) {
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw ParameterError("duplicate descriptor in fusion set enumeration");
  std::vector<std::vector<std::string>> out;
  for (int k : sizes) {
    if (!allow_any_size && k != 2 && k != 3) throw ParameterError("fusion set size must be 2 or 3");
    if (k < 1) throw ParameterError("fusion set size must be positive");
    if (static_cast<std::size_t>(k) > names.size()) continue;
    std::vector<std::size_t> idx(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    while (true) {
      std::vector<std::string> set;
      for (auto i : idx) set.push_back(names[i]);
      out.push_back(std::move(set));
      // next combination in lexicographic order
      int i = k - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == names.size() - static_cast<std::size_t>(k - i)) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (auto j = static_cast<std::size_t>(i) + 1; j < idx.size(); ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

}  // namespace ptx
