#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ptx/error.hpp"

namespace ptx {

struct LabeledPoint {
  std::vector<double> x;
  std::string label;
  bool synthetic = false;

  bool operator==(const LabeledPoint&) const = default;
};

using LabeledSet = std::vector<LabeledPoint>;

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline std::map<std::string, std::size_t> count_labels(const LabeledSet& set) {
  std::map<std::string, std::size_t> c;
  for (const auto& p : set) ++c[p.label];
  return c;
}

inline void check_dimensions(const LabeledSet& set) {
  for (const auto& p : set)
    if (p.x.size() != set.front().x.size()) throw DimensionError("points differ in dimension");
}

/// Pairwise squared Euclidean distances of a fixed point list, precomputed
/// when the list is small enough.
class Distances {
public:
  static constexpr std::size_t kCacheLimit = 8000;

  explicit Distances(const LabeledSet& set) : set_(&set), n_(set.size()) {
    if (n_ <= kCacheLimit) {
      table_.assign(n_ * n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j < n_; ++j) table_[i * n_ + j] = table_[j * n_ + i] = squared_distance((*set_)[i].x, (*set_)[j].x);
    }
  }

  double operator()(std::size_t i, std::size_t j) const {
    return table_.empty() ? squared_distance((*set_)[i].x, (*set_)[j].x) : table_[i * n_ + j];
  }

  /// The k nearest members of `pool` to point i (i itself excluded), by
  /// distance and then by lower index.
  std::vector<std::size_t> nearest(std::size_t i, const std::vector<std::size_t>& pool, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(pool.size());
    for (auto j : pool)
      if (j != i) cand.emplace_back((*this)(i, j), j);
    k = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t t = 0; t < k; ++t) out.push_back(cand[t].second);
    return out;
  }

private:
  const LabeledSet* set_;
  std::size_t n_;
  std::vector<double> table_;
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace ptx
