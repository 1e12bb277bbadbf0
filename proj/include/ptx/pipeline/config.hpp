#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ptx/classifiers/classifiers.hpp"
#include "ptx/dataset/taxonomy.hpp"
#include "ptx/descriptors/descriptors.hpp"
#include "ptx/error.hpp"
#include "ptx/fusion/fusion.hpp"
#include "ptx/hierarchy/pct.hpp"
#include "ptx/resampling/multiclass.hpp"

namespace ptx {

enum class SelectionMetric { MacroF1, FocusF1 };

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path taxonomy;  // empty: built-in RYDLS-20 tree
  std::filesystem::path cache_dir;
  std::filesystem::path out_dir;
  double holdout = 0.7;

  std::vector<DescriptorConfig> descriptors;
  std::vector<int> fusion_sizes{2, 3};

  bool flat = true;
  std::vector<std::string> classifiers{kPaperClassifiers.begin(), kPaperClassifiers.end()};
  std::vector<ResamplingAlgorithm> flat_resamplers;
  bool hierarchical = true;
  std::vector<ResamplingAlgorithm> hier_resamplers;
  std::size_t resampling_k = 0;
  PctParams pct;

  std::vector<FusionRule> rules{FusionRule::SUM, FusionRule::PROD, FusionRule::VOTE};
  std::vector<SelectionCriterion> criteria;
  SelectionMetric selection_metric = SelectionMetric::MacroF1;
  bool select_on_test = false;
  double validation = 0.2;

  std::string focus_label = "COVID-19";
  bool exact_path = false;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;

  Taxonomy load_taxonomy() const { return taxonomy.empty() ? rydls20_taxonomy() : parse_taxonomy(taxonomy); }

  std::uint64_t require_seed() const {
    if (!seed) throw UsageError("a global seed is required (config [run] seed or --seed)");
    return *seed;
  }
};

inline std::vector<ResamplingAlgorithm> all_resamplers() {
  std::vector<ResamplingAlgorithm> v{ResamplingAlgorithm::NONE};
  v.insert(v.end(), kPaperResamplers.begin(), kPaperResamplers.end());
  return v;
}

inline std::string selection_name(const SelectionCriterion& c) {
  switch (c.kind) {
    case SelectionKind::TopN: return "top" + std::to_string(c.n);
    case SelectionKind::BestPerFeature: return "feature" + std::to_string(c.n);
    case SelectionKind::BestPerClassifier: return "classifier" + std::to_string(c.n);
  }
  return "?";
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  if (!(in >> out) || !(in >> std::ws).eof()) throw SchemaError("config key " + key + ": bad value '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw SchemaError("config key " + key + ": expected a boolean, got '" + v + "'");
}

inline SelectionCriterion parse_criterion(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw SchemaError("selection criterion '" + s + "' lacks ':n'");
  const auto kind = s.substr(0, colon);
  const auto n = parse_number<std::size_t>("fusion.criteria", s.substr(colon + 1));
  if (kind == "top") return {SelectionKind::TopN, n};
  if (kind == "feature") return {SelectionKind::BestPerFeature, n};
  if (kind == "classifier") return {SelectionKind::BestPerClassifier, n};
  throw SchemaError("unknown selection criterion '" + kind + "'");
}

}  // namespace detail

/// Reads an INI experiment description. Relative paths resolve against the
/// config file's directory. Unknown sections or keys are rejected.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path q = p;
    return q.is_relative() ? base / q : q;
  };

  const std::map<std::string, std::set<std::string>> known{
      {"data", {"manifest", "taxonomy", "cache", "holdout"}},
      {"descriptors",
       {"use", "fusion_sizes", "letrist", "inceptionv3", "eqp.tau1", "eqp.tau2", "ldn.sigma", "lpq.window",
        "bsif.size", "bsif.bits", "bsif.seed"}},
      {"flat", {"enabled", "classifiers", "resamplers"}},
      {"hierarchy",
       {"enabled", "resamplers", "f_levels", "iterations", "w0", "min_leaf", "decode", "threshold", "exact_path"}},
      {"resampling", {"k"}},
      {"fusion", {"rules", "criteria", "metric", "select_on", "validation"}},
      {"report", {"focus_label"}},
      {"run", {"seed", "out", "workers"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw SchemaError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw SchemaError("config: unknown key " + section + "." + key);
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '/'))) return detail::trim(*v);
    return std::nullopt;
  };

  ExperimentConfig c;
  c.flat_resamplers = c.hier_resamplers = all_resamplers();
  for (std::size_t m = 2; m <= 5; ++m) c.criteria.push_back({SelectionKind::BestPerFeature, m});
  c.criteria.insert(c.criteria.begin(), {SelectionKind::TopN, 5});

  const auto manifest = get("data/manifest");
  if (!manifest || manifest->empty()) throw SchemaError("config: [data] manifest is required");
  c.manifest = resolve(*manifest);
  if (!std::filesystem::exists(c.manifest)) throw IoError("manifest not found: " + c.manifest.string());
  if (auto v = get("data/taxonomy"); v && !v->empty()) {
    c.taxonomy = resolve(*v);
    if (!std::filesystem::exists(c.taxonomy)) throw IoError("taxonomy not found: " + c.taxonomy.string());
  }
  c.cache_dir = resolve(get("data/cache").value_or("cache"));
  if (auto v = get("data/holdout")) c.holdout = detail::parse_number<double>("data.holdout", *v);

  std::vector<std::string> names;
  if (auto v = get("descriptors/use"))
    names = detail::split_list(*v);
  else
    for (auto id : kPaperDescriptors) names.emplace_back(descriptor_name(id));
  for (const auto& n : names) {
    const auto id = parse_descriptor_id(n);
    if (!id) throw SchemaError("config: unknown descriptor '" + n + "'");
    auto d = DescriptorConfig::defaults(*id);
    if (d.is_external()) {
      std::string key = n;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
      auto p = get("descriptors/" + key);
      if (!p) throw SchemaError("config: descriptor " + n + " is ingested and needs [descriptors] " + key);
      d.external_path = resolve(*p);
      if (!std::filesystem::exists(d.external_path)) throw IoError(n + " vectors not found: " + d.external_path.string());
    }
    if (auto v = get("descriptors/eqp.tau1")) d.eqp.tau1 = detail::parse_number<double>("eqp.tau1", *v);
    if (auto v = get("descriptors/eqp.tau2")) d.eqp.tau2 = detail::parse_number<double>("eqp.tau2", *v);
    if (auto v = get("descriptors/ldn.sigma")) d.ldn.sigma = detail::parse_number<double>("ldn.sigma", *v);
    if (auto v = get("descriptors/lpq.window")) d.lpq.win_size = detail::parse_number<int>("lpq.window", *v);
    if (*id == DescriptorId::BSIF && (get("descriptors/bsif.size") || get("descriptors/bsif.bits") ||
                                      get("descriptors/bsif.seed"))) {
      const int size = detail::parse_number<int>("bsif.size", get("descriptors/bsif.size").value_or("11"));
      const int bits = detail::parse_number<int>("bsif.bits", get("descriptors/bsif.bits").value_or("8"));
      const auto seed = detail::parse_number<std::uint64_t>("bsif.seed", get("descriptors/bsif.seed").value_or("1"));
      d.bsif_bank = generate_bsif_bank(size, bits, seed);
    }
    c.descriptors.push_back(std::move(d));
  }
  if (c.descriptors.empty()) throw SchemaError("config: no descriptors selected");
  if (auto v = get("descriptors/fusion_sizes")) {
    c.fusion_sizes.clear();
    for (const auto& s : detail::split_list(*v)) c.fusion_sizes.push_back(detail::parse_number<int>("fusion_sizes", s));
  }

  auto resamplers = [&](const std::string& key, std::vector<ResamplingAlgorithm>& out) {
    if (auto v = get(key)) {
      out.clear();
      for (const auto& s : detail::split_list(*v)) out.push_back(parse_resampler(s));
    }
  };
  if (auto v = get("flat/enabled")) c.flat = detail::parse_bool("flat.enabled", *v);
  if (auto v = get("flat/classifiers")) {
    c.classifiers = detail::split_list(*v);
    for (const auto& n : c.classifiers) ClassifierSpec::parse(n);
  }
  resamplers("flat/resamplers", c.flat_resamplers);
  if (auto v = get("hierarchy/enabled")) c.hierarchical = detail::parse_bool("hierarchy.enabled", *v);
  resamplers("hierarchy/resamplers", c.hier_resamplers);
  if (auto v = get("hierarchy/f_levels")) {
    c.pct.f_test_levels.clear();
    for (const auto& s : detail::split_list(*v)) c.pct.f_test_levels.push_back(detail::parse_number<double>("f_levels", s));
  }
  if (auto v = get("hierarchy/iterations")) c.pct.iterations = detail::parse_number<std::size_t>("iterations", *v);
  if (auto v = get("hierarchy/w0")) c.pct.w0 = detail::parse_number<double>("w0", *v);
  if (auto v = get("hierarchy/min_leaf")) c.pct.min_leaf = detail::parse_number<std::size_t>("min_leaf", *v);
  if (auto v = get("hierarchy/decode")) {
    if (*v == "relative")
      c.pct.decode = DecodeMode::Relative;
    else if (*v == "absolute")
      c.pct.decode = DecodeMode::Absolute;
    else
      throw SchemaError("config: hierarchy.decode must be relative or absolute");
  }
  if (auto v = get("hierarchy/threshold")) c.pct.decode_threshold = detail::parse_number<double>("threshold", *v);
  if (auto v = get("hierarchy/exact_path")) c.exact_path = detail::parse_bool("exact_path", *v);
  if (auto v = get("resampling/k")) c.resampling_k = detail::parse_number<std::size_t>("resampling.k", *v);

  if (auto v = get("fusion/rules")) {
    c.rules.clear();
    for (const auto& s : detail::split_list(*v)) c.rules.push_back(parse_fusion_rule(s));
  }
  if (auto v = get("fusion/criteria")) {
    c.criteria.clear();
    for (const auto& s : detail::split_list(*v)) c.criteria.push_back(detail::parse_criterion(s));
  }
  if (auto v = get("fusion/metric")) {
    if (*v == "macro_f1")
      c.selection_metric = SelectionMetric::MacroF1;
    else if (*v == "focus_f1")
      c.selection_metric = SelectionMetric::FocusF1;
    else
      throw SchemaError("config: fusion.metric must be macro_f1 or focus_f1");
  }
  if (auto v = get("fusion/select_on")) {
    if (*v != "validation" && *v != "test") throw SchemaError("config: fusion.select_on must be validation or test");
    c.select_on_test = *v == "test";
  }
  if (auto v = get("fusion/validation")) c.validation = detail::parse_number<double>("fusion.validation", *v);
  if (!(c.validation > 0 && c.validation < 1)) throw SchemaError("config: fusion.validation must lie in (0, 1)");

  if (auto v = get("report/focus_label")) c.focus_label = *v;
  if (auto v = get("run/seed")) c.seed = detail::parse_number<std::uint64_t>("run.seed", *v);
  c.out_dir = resolve(get("run/out").value_or("results"));
  if (auto v = get("run/workers")) c.workers = detail::parse_number<unsigned>("run.workers", *v);
  return c;
}

}  // namespace ptx
