#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ptx/classifiers/classifier.hpp"
#include "ptx/error.hpp"
#include "ptx/hierarchy/pct.hpp"

namespace ptx {

enum class FusionRule { SUM, PROD, VOTE };

inline std::string_view fusion_rule_name(FusionRule r) {
  switch (r) {
    case FusionRule::SUM: return "SUM";
    case FusionRule::PROD: return "PROD";
    case FusionRule::VOTE: return "VOTE";
  }
  return "?";
}

inline FusionRule parse_fusion_rule(std::string_view s) {
  for (auto r : {FusionRule::SUM, FusionRule::PROD, FusionRule::VOTE})
    if (fusion_rule_name(r) == s) return r;
  throw ParameterError("unknown fusion rule '" + std::string(s) + "'");
}

inline constexpr double kProdFloor = 1e-12;

struct FusionResult {
  ScoreVector scores;
  std::size_t winner = 0;
  bool degenerate = false;  // PROD collapsed to zero and was replaced by uniform

  const std::string& label() const { return scores.labels.at(winner); }
};

/// Kittler-style combination of per-model score vectors. VOTE ties go to the
/// larger summed score, then to the smaller label name.
inline FusionResult late_fuse(const std::vector<ScoreVector>& in, FusionRule rule) {
  if (in.size() < 2) throw ParameterError("late fusion needs at least two score vectors");
  for (const auto& s : in)
    if (s.labels != in.front().labels || s.scores.size() != s.labels.size())
      throw AlignmentError("score vectors disagree on labels");
  const std::size_t L = in.front().labels.size();
  FusionResult out;
  out.scores.labels = in.front().labels;
  std::vector<double> sum(L, 0.0);
  for (const auto& s : in)
    for (std::size_t c = 0; c < L; ++c) sum[c] += s.scores[c];

  std::vector<double> v(L, 0.0);
  switch (rule) {
    case FusionRule::SUM: v = sum; break;
    case FusionRule::PROD: {
      std::fill(v.begin(), v.end(), 1.0);
      for (const auto& s : in)
        for (std::size_t c = 0; c < L; ++c) v[c] *= std::max(s.scores[c], kProdFloor);
      break;
    }
    case FusionRule::VOTE:
      for (const auto& s : in) v[s.argmax()] += 1.0;
      break;
  }
  double total = 0;
  for (double x : v) total += x;
  if (!(total > 0) || !std::isfinite(total)) {
    out.degenerate = true;
    v.assign(L, 1.0);
    total = static_cast<double>(L);
  }
  for (auto& x : v) x /= total;
  out.scores.scores = v;

  out.winner = 0;
  for (std::size_t c = 1; c < L; ++c) {
    const auto w = out.winner;
    const bool better = rule == FusionRule::VOTE
                            ? (v[c] > v[w] || (v[c] == v[w] && (sum[c] > sum[w] ||
                                                                (sum[c] == sum[w] && out.scores.labels[c] < out.scores.labels[w]))))
                            : (v[c] > v[w] || (v[c] == v[w] && out.scores.labels[c] < out.scores.labels[w]));
    if (better) out.winner = c;
  }
  return out;
}

/// Lowers every node to at most its parent's value.
inline NodeVector enforce_downward_min(NodeVector v, const Taxonomy& tax) {
  for (std::size_t i = 0; i < tax.size(); ++i) {  // parents precede children in path order
    const int p = tax.node(static_cast<int>(i)).parent;
    if (p >= 0) v[i] = std::min(v[i], v[static_cast<std::size_t>(p)]);
  }
  return v;
}

/// Per-node fusion of hierarchical scores. SUM takes the mean, PROD the
/// geometric mean of floored values, and VOTE the fraction of inputs whose
/// decoded path covers the node.
inline NodeVector fuse_node_vectors(const std::vector<NodeVector>& in, FusionRule rule, const Taxonomy& tax,
                                    DecodeMode mode = DecodeMode::Relative, double threshold = 0.5) {
  if (in.size() < 2) throw ParameterError("late fusion needs at least two node vectors");
  for (const auto& v : in)
    if (v.size() != tax.size()) throw AlignmentError("node vector does not match the taxonomy");
  const double m = static_cast<double>(in.size());
  NodeVector out(tax.size(), 0.0);
  switch (rule) {
    case FusionRule::SUM:
      for (const auto& v : in)
        for (std::size_t n = 0; n < out.size(); ++n) out[n] += v[n] / m;
      break;
    case FusionRule::PROD:
      for (const auto& v : in)
        for (std::size_t n = 0; n < out.size(); ++n) out[n] += std::log(std::max(v[n], kProdFloor)) / m;
      for (auto& x : out) x = std::exp(x);
      break;
    case FusionRule::VOTE:
      for (const auto& v : in)
        for (int a : tax.lineage(tax.require(decode_path(v, tax, mode, threshold))))
          out[static_cast<std::size_t>(a)] += 1.0 / m;
      break;
  }
  return enforce_downward_min(out, tax);
}

/// One evaluated scenario as seen by selection.
struct ScenarioScore {
  std::string feature_set;
  std::string classifier;
  std::string resampling;
  double metric = 0;

  std::string key() const { return feature_set + "|" + classifier + "|" + resampling; }
  bool operator==(const ScenarioScore&) const = default;
};

enum class SelectionKind { TopN, BestPerFeature, BestPerClassifier };

struct SelectionCriterion {
  SelectionKind kind = SelectionKind::TopN;
  std::size_t n = 5;  // N for TopN, subset size m otherwise
};

/// Metric descending, then key ascending.
inline std::vector<ScenarioScore> rank_scenarios(std::vector<ScenarioScore> v) {
  std::sort(v.begin(), v.end(), [](const ScenarioScore& a, const ScenarioScore& b) {
    return a.metric != b.metric ? a.metric > b.metric : a.key() < b.key();
  });
  v.erase(std::unique(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.key() == b.key(); }), v.end());
  return v;
}

namespace detail {

template <typename Fn>
void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

/// Scenario sets to fuse. TopN yields one set; the per-group criteria take
/// each group's best scenario and yield every size-n subset of those bests,
/// in combination order over the ranked bests.
inline std::vector<std::vector<ScenarioScore>> select_scenarios(const std::vector<ScenarioScore>& results,
                                                                SelectionCriterion c) {
  if (results.empty()) throw SelectionError("no results to select from");
  if (c.n == 0) throw SelectionError("selection size must be positive");
  const auto ranked = rank_scenarios(results);
  if (c.kind == SelectionKind::TopN) {
    if (c.n > ranked.size())
      throw SelectionError("Top-" + std::to_string(c.n) + " needs that many scenarios, have " +
                           std::to_string(ranked.size()));
    return {std::vector<ScenarioScore>(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(c.n))};
  }
  std::vector<ScenarioScore> bests;
  std::map<std::string, bool> seen;
  for (const auto& r : ranked) {
    const auto& group = c.kind == SelectionKind::BestPerFeature ? r.feature_set : r.classifier;
    if (!seen[group]) {
      seen[group] = true;
      bests.push_back(r);
    }
  }
  if (c.n > bests.size())
    throw SelectionError("subset size " + std::to_string(c.n) + " exceeds the " + std::to_string(bests.size()) +
                         " available groups");
  std::vector<std::vector<ScenarioScore>> out;
  detail::for_each_combination(bests.size(), c.n, [&](const std::vector<std::size_t>& idx) {
    std::vector<ScenarioScore> set;
    for (auto i : idx) set.push_back(bests[i]);
    out.push_back(std::move(set));
  });
  return out;
}

}  // namespace ptx
