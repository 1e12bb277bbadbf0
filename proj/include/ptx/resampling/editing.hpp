#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptx/resampling/labeled_set.hpp"
#include "ptx/resampling/oversampling.hpp"

namespace ptx {

enum class EnnMode { ENN, RENN, ALLKNN };

struct UndersampleResult {
  LabeledSet set;
  std::vector<std::size_t> kept;     // indices into the input, ascending
  std::vector<std::size_t> skipped;  // removals withheld to keep a class alive
};

namespace detail {

/// True when some other label strictly outvotes `own` among the neighbors.
inline bool outvoted(const LabeledSet& set, const std::vector<std::size_t>& nn, const std::string& own) {
  std::map<std::string, std::size_t> votes;
  for (auto j : nn) ++votes[set[j].label];
  const std::size_t mine = votes[own];
  for (const auto& [label, v] : votes)
    if (label != own && v > mine) return true;
  return false;
}

/// Removes `doomed` from `alive`, except that no label drops below `floor`:
/// the earliest doomed members of such a label are kept and reported.
inline std::vector<std::size_t> apply_removals(const LabeledSet& set, const std::vector<std::size_t>& alive,
                                               const std::set<std::size_t>& doomed, std::size_t floor,
                                               std::vector<std::size_t>& skipped) {
  std::map<std::string, std::size_t> remaining;
  for (auto i : alive)
    if (!doomed.count(i)) ++remaining[set[i].label];
  std::set<std::size_t> spared;
  for (auto i : alive) {
    if (!doomed.count(i)) continue;
    auto& r = remaining[set[i].label];
    if (r < floor) {
      ++r;
      spared.insert(i);
      skipped.push_back(i);
    }
  }
  std::vector<std::size_t> out;
  for (auto i : alive)
    if (!doomed.count(i) || spared.count(i)) out.push_back(i);
  return out;
}

/// One ENN pass over the alive points with neighbors drawn from them.
inline std::set<std::size_t> enn_marks(const LabeledSet& set, const Distances& dist,
                                       const std::vector<std::size_t>& alive, std::size_t k,
                                       const std::optional<std::string>& protect) {
  std::set<std::size_t> doomed;
  for (auto i : alive) {
    if (protect && set[i].label == *protect) continue;
    if (outvoted(set, dist.nearest(i, alive, k), set[i].label)) doomed.insert(i);
  }
  return doomed;
}

inline UndersampleResult gather(const LabeledSet& set, std::vector<std::size_t> kept, std::vector<std::size_t> skipped) {
  UndersampleResult r;
  for (auto i : kept) r.set.push_back(set[i]);
  r.kept = std::move(kept);
  std::sort(skipped.begin(), skipped.end());
  skipped.erase(std::unique(skipped.begin(), skipped.end()), skipped.end());
  r.skipped = std::move(skipped);
  return r;
}

}  // namespace detail

/// Edited nearest neighbors. Points of `protect` are never removed; no
/// label falls below `floor` members.
inline UndersampleResult edited_nn(const LabeledSet& set, EnnMode mode = EnnMode::ENN, std::size_t k = 3,
                                   const std::optional<std::string>& protect = std::nullopt, std::size_t floor = 1) {
  if (k < 1) throw ParameterError("k must be positive");
  if (set.size() < k + 1) throw ResamplingError("edited NN needs more than k points");
  check_dimensions(set);
  const Distances dist(set);
  std::vector<std::size_t> alive = all_indices(set.size());
  std::vector<std::size_t> skipped;

  switch (mode) {
    case EnnMode::ENN:
      alive = detail::apply_removals(set, alive, detail::enn_marks(set, dist, alive, k, protect), floor, skipped);
      break;
    case EnnMode::RENN:
      while (true) {
        auto doomed = detail::enn_marks(set, dist, alive, k, protect);
        auto next = detail::apply_removals(set, alive, doomed, floor, skipped);
        if (next.size() == alive.size()) break;
        alive = std::move(next);
      }
      break;
    case EnnMode::ALLKNN:
      for (std::size_t kk = 1; kk <= k && alive.size() > kk; ++kk)
        alive = detail::apply_removals(set, alive, detail::enn_marks(set, dist, alive, kk, protect), floor, skipped);
      break;
  }
  return detail::gather(set, std::move(alive), std::move(skipped));
}

/// Index pairs (a < b) of cross-label mutual nearest neighbors.
inline std::vector<std::pair<std::size_t, std::size_t>> find_tomek_links(const LabeledSet& set) {
  std::vector<std::pair<std::size_t, std::size_t>> links;
  if (set.size() < 2) return links;
  const Distances dist(set);
  const auto everyone = all_indices(set.size());
  std::vector<std::size_t> nn(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) nn[i] = dist.nearest(i, everyone, 1).front();
  for (std::size_t a = 0; a < set.size(); ++a) {
    const auto b = nn[a];
    if (a < b && nn[b] == a && set[a].label != set[b].label) links.emplace_back(a, b);
  }
  return links;
}

/// Removes one member of every Tomek link: never a `protect` point;
/// otherwise the member whose label is more frequent in the set, ties to
/// the lexicographically greater label.
inline UndersampleResult tomek_links(const LabeledSet& set, const std::optional<std::string>& protect = std::nullopt) {
  check_dimensions(set);
  const auto counts = count_labels(set);
  std::set<std::size_t> doomed;
  for (auto [a, b] : find_tomek_links(set)) {
    const auto& la = set[a].label;
    const auto& lb = set[b].label;
    std::size_t victim;
    if (protect && la == *protect)
      victim = b;
    else if (protect && lb == *protect)
      victim = a;
    else if (counts.at(la) != counts.at(lb))
      victim = counts.at(la) > counts.at(lb) ? a : b;
    else
      victim = la > lb ? a : b;
    doomed.insert(victim);
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (!doomed.count(i)) kept.push_back(i);
  return detail::gather(set, std::move(kept), {});
}

inline UndersampleResult smote_tomek(const LabeledSet& set, const std::string& minority_label, std::size_t target,
                                     std::size_t k = 5, std::uint64_t seed = 0) {
  return tomek_links(smote(set, minority_label, target, SmoteVariant::Plain, k, seed).set);
}

}  // namespace ptx
