#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptx/dataset/extract.hpp"
#include "ptx/dataset/feature_matrix.hpp"
#include "ptx/dataset/manifest.hpp"
#include "ptx/evaluation/metrics.hpp"
#include "ptx/fusion/fusion.hpp"
#include "ptx/parallel.hpp"
#include "ptx/pipeline/config.hpp"

namespace ptx {

using Log = std::function<void(const std::string&)>;

inline void stderr_log(const std::string& line) { std::clog << line << '\n'; }

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Results

struct ExperimentResult {
  std::string key;
  std::string digest;
  std::string schema;  // flat | hier
  std::string fusion;  // single | early | late
  std::string feature_set;
  std::string classifier;
  std::string resampling;
  std::string rule;                  // late only
  std::string selection;             // late only
  std::vector<std::string> members;  // late only: constituent cell keys
  bool ok = true;
  std::string error;
  std::vector<LabelMetrics> per_label;
  double macro_f1 = 0;
  double focus_f1 = 0;
  std::optional<double> val_macro_f1;
  std::optional<double> val_focus_f1;
  ConfusionMatrix confusion;
  std::size_t exact_matches = 0;
  std::string scores_file;
  double wall_time = 0;

  std::string group() const { return schema + "-" + fusion; }
};

inline nlohmann::json to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["key"] = r.key;
  j["digest"] = r.digest;
  j["schema"] = r.schema;
  j["fusion"] = r.fusion;
  j["feature_set"] = r.feature_set;
  j["classifier"] = r.classifier;
  j["resampling"] = r.resampling;
  if (!r.rule.empty()) j["rule"] = r.rule;
  if (!r.selection.empty()) j["selection"] = r.selection;
  if (!r.members.empty()) j["members"] = r.members;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) {
    j["error"] = r.error;
    j["wall_time"] = r.wall_time;
    return j;
  }
  auto& pl = j["per_label"] = nlohmann::json::array();
  for (const auto& m : r.per_label)
    pl.push_back({{"label", m.label},
                  {"tp", m.tp},
                  {"fp", m.fp},
                  {"fn", m.fn},
                  {"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1}});
  j["macro_f1"] = r.macro_f1;
  j["focus_f1"] = r.focus_f1;
  j["val_macro_f1"] = r.val_macro_f1 ? nlohmann::json(*r.val_macro_f1) : nlohmann::json();
  j["val_focus_f1"] = r.val_focus_f1 ? nlohmann::json(*r.val_focus_f1) : nlohmann::json();
  j["confusion"] = {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}};
  if (r.schema == "hier") j["exact_matches"] = r.exact_matches;
  j["scores_file"] = r.scores_file;
  j["wall_time"] = r.wall_time;
  return j;
}

inline ExperimentResult result_from_json(const nlohmann::json& j) {
  ExperimentResult r;
  try {
    r.key = j.at("key");
    r.digest = j.at("digest");
    r.schema = j.at("schema");
    r.fusion = j.at("fusion");
    r.feature_set = j.at("feature_set");
    r.classifier = j.at("classifier");
    r.resampling = j.at("resampling");
    r.rule = j.value("rule", "");
    r.selection = j.value("selection", "");
    if (j.contains("members")) r.members = j.at("members").get<std::vector<std::string>>();
    r.ok = j.at("status") == "ok";
    r.wall_time = j.value("wall_time", 0.0);
    if (!r.ok) {
      r.error = j.value("error", "");
      return r;
    }
    for (const auto& m : j.at("per_label"))
      r.per_label.push_back(binary_metrics(m.at("label"), m.at("tp"), m.at("fp"), m.at("fn")));
    r.macro_f1 = j.at("macro_f1");
    r.focus_f1 = j.at("focus_f1");
    if (!j.at("val_macro_f1").is_null()) r.val_macro_f1 = j.at("val_macro_f1").get<double>();
    if (!j.at("val_focus_f1").is_null()) r.val_focus_f1 = j.at("val_focus_f1").get<double>();
    r.confusion.labels = j.at("confusion").at("labels").get<std::vector<std::string>>();
    r.confusion.counts = j.at("confusion").at("counts").get<std::vector<std::vector<std::size_t>>>();
    r.exact_matches = j.value("exact_matches", std::size_t{0});
    r.scores_file = j.at("scores_file");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed result record: ") + e.what());
  }
  return r;
}

/// Append-only results file; the latest record per key wins. compact()
/// rewrites it sorted by key through an atomic rename.
class ResultLog {
 public:
  explicit ResultLog(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const { return path_; }

  void reset() { write_text_atomic(path_, ""); }

  std::map<std::string, ExperimentResult> latest(Log log = {}) const {
    std::map<std::string, ExperimentResult> out;
    std::ifstream in(path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto r = result_from_json(nlohmann::json::parse(line));
        out[r.key] = std::move(r);
      } catch (const std::exception& e) {
        // a torn final line from an interrupted run
        if (log) log(path_.string() + ":" + std::to_string(lineno) + ": skipped unreadable record");
      }
    }
    return out;
  }

  void append(const ExperimentResult& r) {
    const auto line = to_json(r).dump() + "\n";
    std::lock_guard lock(mu_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    bool torn = false;
    if (std::ifstream in{path_, std::ios::binary}; in && in.seekg(0, std::ios::end) && in.tellg() > 0) {
      in.seekg(-1, std::ios::end);
      torn = in.get() != '\n';
    }
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << (torn ? "\n" : "") << line;
    out.flush();
  }

  void compact() {
    std::lock_guard lock(mu_);
    std::string text;
    for (const auto& [key, r] : latest()) text += to_json(r).dump() + "\n";
    write_text_atomic(path_, text);
  }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

/// Sorted key/digest/status/metric listing; carries no timing so that
/// interrupted-and-resumed runs produce the same bytes as clean ones.
inline void write_index(const std::filesystem::path& path, const std::map<std::string, ExperimentResult>& results) {
  auto arr = nlohmann::json::array();
  for (const auto& [key, r] : results) {
    nlohmann::json e{{"key", key}, {"digest", r.digest}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
      e["macro_f1"] = r.macro_f1;
      e["focus_f1"] = r.focus_f1;
    }
    arr.push_back(std::move(e));
  }
  write_text_atomic(path, arr.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Per-sample scores

struct ScoreTable {
  std::vector<std::string> labels;  // flat labels or taxonomy node paths
  std::vector<std::string> sample_ids;
  std::vector<std::string> truth;
  std::vector<std::string> pred;
  std::vector<std::vector<double>> scores;

  std::size_t size() const { return sample_ids.size(); }
};

inline std::string score_table_csv(const ScoreTable& t) {
  std::ostringstream s;
  s << "sample_id,truth,pred";
  for (const auto& l : t.labels) s << ',' << csv_field(l);
  s << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    s << csv_field(t.sample_ids[i]) << ',' << csv_field(t.truth[i]) << ',' << csv_field(t.pred[i]);
    for (double v : t.scores[i]) s << ',' << format_g17(v);
    s << '\n';
  }
  return s.str();
}

inline ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scores " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty score file");
  auto head = split_csv_line(line);
  if (head.size() < 3 || head[0] != "sample_id" || head[1] != "truth" || head[2] != "pred")
    throw SchemaError(path.string() + ": bad score header");
  ScoreTable t;
  t.labels.assign(head.begin() + 3, head.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != head.size()) throw SchemaError(path.string() + ": ragged score row");
    t.sample_ids.push_back(f[0]);
    t.truth.push_back(f[1]);
    t.pred.push_back(f[2]);
    std::vector<double> v;
    for (std::size_t c = 3; c < f.size(); ++c) v.push_back(std::stod(f[c]));
    t.scores.push_back(std::move(v));
  }
  return t;
}

inline std::string scores_file_name(const std::string& key) {
  std::string s;
  for (char c : key) s += (c == '|') ? std::string("__") : std::string(1, c);
  return s + ".csv";
}

// ---------------------------------------------------------------------------
// Evaluation helpers

inline double focus_of(const std::vector<LabelMetrics>& per_label, const std::string& focus) {
  for (const auto& m : per_label)
    if (m.label == focus ||
        (m.label.size() > focus.size() && m.label.compare(m.label.size() - focus.size(), focus.size(), focus) == 0 &&
         m.label[m.label.size() - focus.size() - 1] == kPathSeparator))
      return m.f1;
  return 0.0;
}

inline void evaluate_flat(const ScoreTable& t, const std::string& focus, ExperimentResult& r) {
  std::set<std::string> labels(t.labels.begin(), t.labels.end());
  labels.insert(t.truth.begin(), t.truth.end());
  r.confusion = confusion(t.pred, t.truth, {labels.begin(), labels.end()});
  const auto rep = prf1(r.confusion);
  r.per_label = rep.per_label;
  r.macro_f1 = rep.macro_f1;
  r.focus_f1 = focus_of(rep.per_label, focus);
}

inline void evaluate_hier(const ScoreTable& t, const Taxonomy& tax, bool exact, const std::string& focus,
                          ExperimentResult& r) {
  const auto rep = hierarchical_report(t.pred, t.truth, tax, exact);
  r.per_label = rep.nodes.per_label;
  r.macro_f1 = rep.nodes.macro_f1;
  r.focus_f1 = focus_of(rep.nodes.per_label, focus);
  r.confusion = rep.grouped;
  r.exact_matches = rep.exact_matches;
}

// ---------------------------------------------------------------------------
// Workspace: samples with splits plus every configured descriptor matrix

struct Workspace {
  ExperimentConfig cfg;
  Taxonomy tax;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;
  std::string data_digest;
  std::map<std::string, FeatureMatrix> matrices;  // by descriptor name
  std::map<std::string, std::string> descriptor_digests;

  std::vector<std::string> descriptor_names() const {
    std::vector<std::string> v;
    for (const auto& d : cfg.descriptors) v.push_back(d.name());
    return v;
  }

  /// Single descriptors in config order, then the early-fusion sets.
  std::vector<std::vector<std::string>> feature_sets() const {
    std::vector<std::vector<std::string>> out;
    for (const auto& n : descriptor_names()) out.push_back({n});
    const auto fused = enumerate_fusion_sets(descriptor_names(), cfg.fusion_sizes, true);
    for (const auto& s : fused)
      if (s.size() > 1) out.push_back(s);
    return out;
  }

  FeatureMatrix matrix_for(const std::vector<std::string>& set) const {
    std::vector<FeatureMatrix> parts;
    for (const auto& n : set) parts.push_back(matrices.at(n));
    return early_fuse(parts);
  }
};

/// Manifest with splits; unassigned samples get a stratified holdout.
inline std::vector<Sample> prepare_samples(const ExperimentConfig& cfg, const Taxonomy& tax, std::uint64_t seed) {
  auto samples = parse_manifest(cfg.manifest, tax);
  if (samples.empty()) throw SchemaError("manifest has no samples");
  return stratified_holdout(std::move(samples), cfg.holdout, derive_seed(seed, "holdout"));
}

inline std::string samples_digest(const std::vector<Sample>& samples) {
  std::string s;
  for (const auto& x : samples) s += x.sample_id + "," + x.label + "," + std::string(split_name(x.split)) + "\n";
  return hex_digest(s);
}

struct ExtractSummaryRow {
  std::string name;
  std::size_t dim = 0;
  ExtractStats stats;
  double seconds = 0;
};

inline Workspace open_workspace(const ExperimentConfig& cfg, Log log = stderr_log,
                                std::vector<ExtractSummaryRow>* summary = nullptr) {
  Workspace w;
  w.cfg = cfg;
  w.seed = cfg.require_seed();
  w.tax = cfg.load_taxonomy();
  w.samples = prepare_samples(cfg, w.tax, w.seed);
  w.data_digest = samples_digest(w.samples);
  for (const auto& d : cfg.descriptors) {
    const auto t0 = std::chrono::steady_clock::now();
    ExtractStats stats;
    w.matrices[d.name()] = extract_features(w.samples, d, cfg.cache_dir, &stats, cfg.workers);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    w.descriptor_digests[d.name()] = d.digest();
    if (log) {
      std::ostringstream s;
      s << "extract " << d.name() << ": dim " << d.dim() << ", decoded " << stats.decoded << ", cache hits "
        << stats.cache_hits << ", " << secs << " s";
      log(s.str());
    }
    if (summary) summary->push_back({d.name(), d.dim(), stats, secs});
  }
  return w;
}

// ---------------------------------------------------------------------------
// Grid cells

struct Cell {
  std::string schema;  // flat | hier
  std::vector<std::string> feature_set;
  std::string classifier;  // PCT for hierarchical cells
  ResamplingAlgorithm resampler = ResamplingAlgorithm::NONE;

  std::string feature_name() const {
    std::string s;
    for (const auto& d : feature_set) s += (s.empty() ? "" : "+") + d;
    return s;
  }
  std::string key() const {
    return schema + "|" + feature_name() + "|" + classifier + "|" + std::string(resampler_name(resampler));
  }
};

struct GridShape {
  std::size_t feature_sets = 0;
  std::size_t flat_cells = 0;
  std::size_t hier_cells = 0;
};

inline GridShape grid_shape(const ExperimentConfig& cfg, std::size_t n_feature_sets) {
  GridShape g;
  g.feature_sets = n_feature_sets;
  if (cfg.flat) g.flat_cells = n_feature_sets * cfg.classifiers.size() * cfg.flat_resamplers.size();
  if (cfg.hierarchical) g.hier_cells = n_feature_sets * cfg.hier_resamplers.size();
  return g;
}

inline std::vector<Cell> enumerate_cells(const Workspace& w) {
  std::vector<Cell> out;
  for (const auto& fs : w.feature_sets()) {
    if (w.cfg.flat)
      for (auto r : w.cfg.flat_resamplers)
        for (const auto& c : w.cfg.classifiers) out.push_back({"flat", fs, c, r});
    if (w.cfg.hierarchical)
      for (auto r : w.cfg.hier_resamplers) out.push_back({"hier", fs, "PCT", r});
  }
  return out;
}

inline std::string cell_digest(const Workspace& w, const Cell& c) {
  std::ostringstream s;
  s << c.key() << "|seed=" << w.seed << "|data=" << w.data_digest << "|k=" << w.cfg.resampling_k;
  for (const auto& d : c.feature_set) s << "|" << d << "=" << w.descriptor_digests.at(d);
  if (c.schema == "hier") {
    const auto& p = w.cfg.pct;
    s << "|pct:";
    for (double l : p.f_test_levels) s << format_g17(l) << ",";
    s << p.iterations << "," << p.min_leaf << "," << format_g17(p.w0) << "," << static_cast<int>(p.decode) << ","
      << format_g17(p.decode_threshold) << ",exact=" << w.cfg.exact_path;
  }
  s << "|val=" << (w.cfg.select_on_test ? std::string("test") : format_g17(w.cfg.validation));
  s << "|focus=" << w.cfg.focus_label;
  return hex_digest(s.str());
}

namespace detail {

/// Train rows only, with a per-label share moved to the test split.
/// Every label keeps at least one fitting row.
inline FeatureMatrix validation_view(const FeatureMatrix& m, double frac, std::uint64_t seed, LabelMode mode) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    if (m.rows[i].split == Split::Train) by_label[label_key(m.rows[i].label, mode)].push_back(i);
  std::set<std::size_t> held;
  for (auto& [label, idx] : by_label) {
    Rng rng(derive_seed(seed, "val:" + label));
    rng.shuffle(idx);
    auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * frac));
    n_val = std::min(n_val, idx.size() - 1);
    held.insert(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  FeatureMatrix out{m.descriptor_set, m.dim, {}};
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i].split != Split::Train) continue;
    out.rows.push_back(m.rows[i]);
    if (held.count(i)) out.rows.back().split = Split::Test;
  }
  return out;
}

inline std::string flat_key(const std::string& path) { return label_key(path, LabelMode::Flat); }

/// Resample, fit and score the test rows of `m`.
inline ScoreTable train_and_score(const Workspace& w, const Cell& c, const FeatureMatrix& m, std::uint64_t seed) {
  const bool flat = c.schema == "flat";
  ResamplingSpec rs{c.resampler, w.cfg.resampling_k, derive_seed(seed, "resample"), 2};
  const auto train = resample_multiclass(m, rs, flat ? LabelMode::Flat : LabelMode::LeafPath);
  ScoreTable t;
  if (flat) {
    const auto model = fit_classifier(ClassifierSpec::parse(c.classifier, derive_seed(seed, "model")),
                                      TrainingData::from_matrix(train, flat_key));
    t.labels = model->labels();
    for (const auto& r : m.rows)
      if (r.split == Split::Test) {
        const auto s = model->predict_scores(r.values);
        t.sample_ids.push_back(r.sample_id);
        t.truth.push_back(flat_key(r.label));
        t.pred.push_back(s.top());
        t.scores.push_back(s.scores);
      }
  } else {
    PctParams p = w.cfg.pct;
    p.seed = derive_seed(seed, "model");
    p.workers = 1;
    const auto forest = fit_hierarchical(HierData::from_matrix(train), w.tax, p);
    t.labels = w.tax.label_paths();
    for (const auto& r : m.rows)
      if (r.split == Split::Test) {
        t.sample_ids.push_back(r.sample_id);
        t.truth.push_back(r.label);
        t.pred.push_back(forest.predict_path(r.values));
        t.scores.push_back(forest.node_scores(r.values));
      }
  }
  if (t.size() == 0) throw SchemaError("no test rows to evaluate");
  return t;
}

inline void evaluate(const Workspace& w, const std::string& schema, const ScoreTable& t, ExperimentResult& r) {
  if (schema == "flat")
    evaluate_flat(t, w.cfg.focus_label, r);
  else
    evaluate_hier(t, w.tax, w.cfg.exact_path, w.cfg.focus_label, r);
}

}  // namespace detail

/// Runs one cell end to end and writes its per-sample scores. Library
/// errors become a failed result rather than escaping.
inline ExperimentResult run_cell(const Workspace& w, const Cell& c, const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult r;
  r.key = c.key();
  r.digest = cell_digest(w, c);
  r.schema = c.schema;
  r.fusion = c.feature_set.size() > 1 ? "early" : "single";
  r.feature_set = c.feature_name();
  r.classifier = c.classifier;
  r.resampling = std::string(resampler_name(c.resampler));
  const auto seed = derive_seed(w.seed, r.key);
  try {
    const auto m = w.matrix_for(c.feature_set);
    const auto table = detail::train_and_score(w, c, m, seed);
    detail::evaluate(w, c.schema, table, r);
    if (!w.cfg.select_on_test) {
      const auto mode = c.schema == "flat" ? LabelMode::Flat : LabelMode::LeafPath;
      const auto view = detail::validation_view(m, w.cfg.validation, derive_seed(seed, "validation"), mode);
      ExperimentResult v;
      detail::evaluate(w, c.schema, detail::train_and_score(w, c, view, derive_seed(seed, "validation")), v);
      r.val_macro_f1 = v.macro_f1;
      r.val_focus_f1 = v.focus_f1;
    }
    r.scores_file = "scores/" + scores_file_name(r.key);
    write_text_atomic(out_dir / r.scores_file, score_table_csv(table));
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
    r.per_label.clear();
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

struct RunSummary {
  std::size_t planned = 0;
  std::size_t skipped = 0;
  std::size_t ran = 0;
  std::size_t failed = 0;
};

/// Flat and hierarchical grids. With `resume`, cells whose latest record is
/// ok under the same digest are skipped.
inline RunSummary run_grid(const Workspace& w, bool resume, Log log = stderr_log) {
  const auto& out = w.cfg.out_dir;
  const auto sets = w.feature_sets();
  const auto shape = grid_shape(w.cfg, sets.size());
  if (log) {
    std::ostringstream s;
    s << "grid: " << sets.size() << " feature sets (" << w.cfg.descriptors.size() << " single + "
      << sets.size() - w.cfg.descriptors.size() << " fused); flat " << sets.size() << " x "
      << (w.cfg.flat ? w.cfg.classifiers.size() : 0) << " classifiers x "
      << (w.cfg.flat ? w.cfg.flat_resamplers.size() : 0) << " resamplers = " << shape.flat_cells
      << " cells; hierarchical " << sets.size() << " x " << (w.cfg.hierarchical ? w.cfg.hier_resamplers.size() : 0)
      << " resamplers = " << shape.hier_cells << " cells";
    log(s.str());
  }
  ResultLog results(out / "results.jsonl");
  if (!resume) results.reset();
  const auto existing = results.latest(log);

  const auto cells = enumerate_cells(w);
  RunSummary sum;
  sum.planned = cells.size();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto it = existing.find(cells[i].key());
    if (it != existing.end() && it->second.ok && it->second.digest == cell_digest(w, cells[i]))
      ++sum.skipped;
    else
      todo.push_back(i);
  }
  if (log && sum.skipped) log("resume: " + std::to_string(sum.skipped) + " completed cells skipped");
  std::mutex mu;
  std::size_t done = 0;
  parallel_for(todo.size(), w.cfg.workers, [&](std::size_t k) {
    const auto r = run_cell(w, cells[todo[k]], out);
    results.append(r);
    std::lock_guard lock(mu);
    ++done;
    if (!r.ok) {
      ++sum.failed;
      if (log) log("cell failed: " + r.key + ": " + r.error);
    } else if (log) {
      std::ostringstream s;
      s << "[" << done << "/" << todo.size() << "] " << r.key << " macro-F1 " << r.macro_f1 << " "
        << w.cfg.focus_label << " F1 " << r.focus_f1;
      log(s.str());
    }
  });
  sum.ran = todo.size();
  results.compact();
  write_index(out / "index.json", results.latest());
  return sum;
}

// ---------------------------------------------------------------------------
// Late fusion

namespace detail {

inline double selection_value(const ExperimentResult& r, const ExperimentConfig& cfg) {
  const bool focus = cfg.selection_metric == SelectionMetric::FocusF1;
  if (cfg.select_on_test) return focus ? r.focus_f1 : r.macro_f1;
  const auto v = focus ? r.val_focus_f1 : r.val_macro_f1;
  return v ? *v : -1.0;
}

}  // namespace detail

/// Fuses per-sample scores of stored results. Flat inputs go through
/// late_fuse; hierarchical inputs through fuse_node_vectors and decoding.
inline ScoreTable fuse_tables(const std::vector<const ScoreTable*>& in, FusionRule rule, const std::string& schema,
                              const Taxonomy& tax, const PctParams& pct) {
  if (in.size() < 2) throw ParameterError("late fusion needs at least two score tables");
  const auto& first = *in.front();
  for (const auto* t : in)
    if (t->sample_ids != first.sample_ids || t->labels != first.labels)
      throw AlignmentError("score tables cover different samples or labels");
  ScoreTable out;
  out.labels = first.labels;
  out.sample_ids = first.sample_ids;
  out.truth = first.truth;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (schema == "flat") {
      std::vector<ScoreVector> v;
      for (const auto* t : in) v.push_back({t->labels, t->scores[i]});
      const auto f = late_fuse(v, rule);
      out.pred.push_back(f.label());
      out.scores.push_back(f.scores.scores);
    } else {
      std::vector<NodeVector> v;
      for (const auto* t : in) v.push_back(t->scores[i]);
      const auto f = fuse_node_vectors(v, rule, tax, pct.decode, pct.decode_threshold);
      out.pred.push_back(decode_path(f, tax, pct.decode, pct.decode_threshold));
      out.scores.push_back(f);
    }
  }
  return out;
}

/// Late fusion over single-descriptor cells for every configured
/// criterion and rule. Selection errors are logged and counted as failures.
inline RunSummary run_fusion(const Workspace& w, bool resume, Log log = stderr_log) {
  const auto& out = w.cfg.out_dir;
  ResultLog results(out / "results.jsonl");
  const auto all = results.latest(log);
  RunSummary sum;
  if (log && w.cfg.select_on_test) log("fusion: selecting members on test metrics; fused results are optimistic");

  struct Candidate {
    std::string schema;
    SelectionCriterion crit;
    FusionRule rule;
    std::vector<std::string> members;
  };
  std::vector<Candidate> cands;
  for (const std::string schema : {"flat", "hier"}) {
    std::vector<ScenarioScore> pool;
    for (const auto& [key, r] : all)
      if (r.ok && r.schema == schema && r.fusion == "single")
        if (const double v = detail::selection_value(r, w.cfg); v >= 0)
          pool.push_back({r.feature_set, r.classifier, r.resampling, v});
    if (pool.empty()) continue;
    for (const auto& crit : w.cfg.criteria) {
      if (schema == "hier" && crit.kind == SelectionKind::BestPerClassifier) continue;  // a single model family
      std::vector<std::vector<ScenarioScore>> sets;
      try {
        sets = select_scenarios(pool, crit);
      } catch (const SelectionError& e) {
        ++sum.failed;
        if (log) log("selection " + schema + " " + selection_name(crit) + " failed: " + e.what());
        continue;
      }
      for (const auto& set : sets) {
        std::vector<std::string> members;
        for (const auto& s : set) members.push_back(schema + "|" + s.key());
        if (members.size() < 2) continue;
        for (auto rule : w.cfg.rules) cands.push_back({schema, crit, rule, members});
      }
    }
  }
  if (log) log("fusion: " + std::to_string(cands.size()) + " late-fusion candidates");

  std::map<std::string, ScoreTable> tables;
  for (const auto& c : cands)
    for (const auto& m : c.members)
      if (!tables.count(m)) tables.emplace(m, read_score_table(out / all.at(m).scores_file));

  std::vector<ExperimentResult> pending(cands.size());
  std::vector<bool> skip(cands.size(), false);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    std::string joined, member_digests;
    for (const auto& m : c.members) {
      joined += m + ";";
      member_digests += all.at(m).digest + ";";
    }
    auto& r = pending[i];
    r.schema = c.schema;
    r.fusion = "late";
    r.rule = std::string(fusion_rule_name(c.rule));
    r.selection = selection_name(c.crit);
    r.members = c.members;
    r.key = "late|" + c.schema + "|" + r.selection + "|" + r.rule + "|" + hex_digest(joined);
    r.digest = hex_digest(r.key + "|" + member_digests + "|metric=" +
                          std::to_string(static_cast<int>(w.cfg.selection_metric)) +
                          (w.cfg.select_on_test ? "|test" : "|validation") + "|focus=" + w.cfg.focus_label);
    std::set<std::string> fs, cl, rs;
    for (const auto& m : c.members) {
      fs.insert(all.at(m).feature_set);
      cl.insert(all.at(m).classifier);
      rs.insert(all.at(m).resampling);
    }
    auto join = [](const std::set<std::string>& s) {
      std::string o;
      for (const auto& x : s) o += (o.empty() ? "" : "&") + x;
      return o;
    };
    r.feature_set = join(fs);
    r.classifier = join(cl);
    r.resampling = join(rs);
    if (resume) {
      auto it = all.find(r.key);
      skip[i] = it != all.end() && it->second.ok && it->second.digest == r.digest;
    }
  }
  sum.planned = cands.size();
  std::mutex mu;
  parallel_for(cands.size(), w.cfg.workers, [&](std::size_t i) {
    if (skip[i]) return;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = pending[i];
    try {
      std::vector<const ScoreTable*> in;
      for (const auto& m : cands[i].members) in.push_back(&tables.at(m));
      const auto fused = fuse_tables(in, cands[i].rule, r.schema, w.tax, w.cfg.pct);
      detail::evaluate(w, r.schema, fused, r);
      r.scores_file = "scores/" + scores_file_name(r.key);
      write_text_atomic(out / r.scores_file, score_table_csv(fused));
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.append(r);
    std::lock_guard lock(mu);
    ++sum.ran;
    if (!r.ok) {
      ++sum.failed;
      if (log) log("fusion failed: " + r.key + ": " + r.error);
    }
  });
  for (bool s : skip) sum.skipped += s;
  results.compact();
  write_index(out / "index.json", results.latest());
  return sum;
}

// ---------------------------------------------------------------------------
// Reporting

struct ReportTables {
  std::map<std::string, ExperimentResult> best_macro;  // by group
  std::map<std::string, ExperimentResult> best_focus;
  std::map<std::string, RankTable> ranks;  // features, classifiers, resamplers
};

namespace detail {

inline bool better(const ExperimentResult& a, const ExperimentResult& b, bool focus) {
  const double x = focus ? a.focus_f1 : a.macro_f1, y = focus ? b.focus_f1 : b.macro_f1;
  return x != y ? x > y : a.key < b.key;
}

/// Best metric per (method, context) over the results `pick` admits;
/// contexts with a missing method are dropped.
inline std::optional<RankTable> rank_table(const std::vector<std::string>& methods,
                                           const std::vector<std::string>& contexts,
                                           const std::map<std::string, ExperimentResult>& results,
                                           const std::function<std::optional<std::string>(const ExperimentResult&)>& method_of,
                                           const std::function<bool(const ExperimentResult&, const std::string&)>& in_context,
                                           const std::function<double(const ExperimentResult&, const std::string&)>& metric) {
  std::vector<std::vector<std::optional<double>>> cells(methods.size(), std::vector<std::optional<double>>(contexts.size()));
  for (const auto& [key, r] : results) {
    if (!r.ok) continue;
    const auto m = method_of(r);
    if (!m) continue;
    const auto mi = std::find(methods.begin(), methods.end(), *m) - methods.begin();
    if (static_cast<std::size_t>(mi) == methods.size()) continue;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      if (!in_context(r, contexts[c])) continue;
      const double v = metric(r, contexts[c]);
      auto& cell = cells[static_cast<std::size_t>(mi)][c];
      if (!cell || v > *cell) cell = v;
    }
  }
  std::vector<std::string> used_methods;
  std::vector<std::size_t> mrows;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    bool any = false;
    for (const auto& v : cells[m]) any |= v.has_value();
    if (any) {
      used_methods.push_back(methods[m]);
      mrows.push_back(m);
    }
  }
  std::vector<std::string> used_contexts;
  std::vector<std::size_t> ccols;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    bool full = true;
    for (auto m : mrows) full &= cells[m][c].has_value();
    if (full) {
      used_contexts.push_back(contexts[c]);
      ccols.push_back(c);
    }
  }
  if (used_methods.size() < 2 || used_contexts.empty()) return std::nullopt;
  std::vector<std::vector<std::optional<double>>> v;
  for (auto m : mrows) {
    v.emplace_back();
    for (auto c : ccols) v.back().push_back(cells[m][c]);
  }
  return friedman_ranks(used_methods, used_contexts, v);
}

inline std::string rank_csv(const RankTable& t) {
  std::ostringstream s;
  s << "method";
  for (const auto& c : t.contexts) s << ',' << csv_field(c);
  s << ",mean_rank\n";
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    s << csv_field(t.methods[m]);
    for (std::size_t c = 0; c < t.contexts.size(); ++c) s << ',' << format_g17(t.ranks[m][c]);
    s << ',' << format_g17(t.mean_rank[m]) << '\n';
  }
  return s.str();
}

}  // namespace detail

/// Best-per-group tables for macro-F1 and the focus label, per-label data
/// for each group's best, and Friedman rank tables for descriptors,
/// classifiers and resamplers.
inline ReportTables run_report(const std::filesystem::path& out_dir, const std::string& focus, Log log = stderr_log) {
  const auto results = ResultLog(out_dir / "results.jsonl").latest(log);
  std::map<std::string, ExperimentResult> ok;
  for (const auto& [k, r] : results)
    if (r.ok) ok.emplace(k, r);
  if (ok.empty()) throw UsageError("results index is empty: run grid first");

  ReportTables rep;
  for (const auto& [k, r] : ok) {
    auto& bm = rep.best_macro[r.group()];
    if (bm.key.empty() || detail::better(r, bm, false)) bm = r;
    auto& bf = rep.best_focus[r.group()];
    if (bf.key.empty() || detail::better(r, bf, true)) bf = r;
  }
  const std::string focus_col = "f1_" + focus;
  auto best_csv = [&](const std::map<std::string, ExperimentResult>& best) {
    std::ostringstream s;
    s << "group,key,feature_set,classifier,resampling,rule,macro_f1," << csv_field(focus_col) << '\n';
    for (const auto& [g, r] : best)
      s << g << ',' << csv_field(r.key) << ',' << csv_field(r.feature_set) << ',' << csv_field(r.classifier) << ','
        << csv_field(r.resampling) << ',' << r.rule << ',' << format_g17(r.macro_f1) << ',' << format_g17(r.focus_f1)
        << '\n';
    return s.str();
  };
  write_text_atomic(out_dir / "report" / "best_macro.csv", best_csv(rep.best_macro));
  write_text_atomic(out_dir / "report" / "best_focus.csv", best_csv(rep.best_focus));
  {
    std::ostringstream s;
    s << "group,key,label,precision,recall,f1,support\n";
    for (const auto& [g, r] : rep.best_macro)
      for (const auto& m : r.per_label)
        s << g << ',' << csv_field(r.key) << ',' << csv_field(m.label) << ',' << format_g17(m.precision) << ','
          << format_g17(m.recall) << ',' << format_g17(m.f1) << ',' << m.support() << '\n';
    write_text_atomic(out_dir / "report" / "per_label.csv", s.str());
  }

  // Rank tables. Descriptors keep their canonical order; methods without any result drop out.
  std::vector<std::string> descriptors;
  for (auto id : kPaperDescriptors) descriptors.emplace_back(descriptor_name(id));
  for (const auto& [k, r] : ok)
    if (r.fusion == "single" && std::find(descriptors.begin(), descriptors.end(), r.feature_set) == descriptors.end())
      descriptors.push_back(r.feature_set);
  const std::vector<std::string> four{"flat/macro", "flat/" + focus, "hier/macro", "hier/" + focus};
  const std::vector<std::string> two{"flat/macro", "flat/" + focus};
  auto in_ctx = [](const ExperimentResult& r, const std::string& ctx) {
    return r.fusion != "late" && ctx.compare(0, r.schema.size() + 1, r.schema + "/") == 0;
  };
  auto metric = [](const ExperimentResult& r, const std::string& ctx) {
    return ctx.substr(ctx.find('/') + 1) == "macro" ? r.macro_f1 : r.focus_f1;
  };
  std::vector<std::string> resamplers;
  for (auto a : kPaperResamplers) resamplers.emplace_back(resampler_name(a));

  const std::vector<std::pair<std::string, std::optional<RankTable>>> tables{
      {"features", detail::rank_table(descriptors, four, ok,
                                      [](const ExperimentResult& r) -> std::optional<std::string> {
                                        if (r.fusion != "single") return std::nullopt;
                                        return r.feature_set;
                                      },
                                      in_ctx, metric)},
      {"classifiers", detail::rank_table({"KNN", "SVM", "MLP", "DT", "RF"}, two, ok,
                                         [](const ExperimentResult& r) -> std::optional<std::string> {
                                           if (r.schema != "flat") return std::nullopt;
                                           return r.classifier.rfind("KNN", 0) == 0 ? "KNN" : r.classifier;
                                         },
                                         in_ctx, metric)},
      {"resamplers", detail::rank_table(resamplers, four, ok,
                                        [](const ExperimentResult& r) -> std::optional<std::string> {
                                          return r.resampling;
                                        },
                                        in_ctx, metric)},
  };
  std::ostringstream friedman;
  friedman << "table,methods,contexts,chi_square,p_value\n";
  for (const auto& [name, t] : tables) {
    if (!t) {
      if (log) log("report: rank table '" + name + "' skipped (fewer than two methods with complete contexts)");
      continue;
    }
    write_text_atomic(out_dir / "report" / ("rank_" + name + ".csv"), detail::rank_csv(*t));
    friedman << name << ',' << t->methods.size() << ',' << t->contexts.size() << ',' << format_g17(t->chi_square)
             << ',' << format_g17(t->p_value) << '\n';
    rep.ranks.emplace(name, *t);
  }
  write_text_atomic(out_dir / "report" / "friedman.csv", friedman.str());
  if (log)
    for (const auto& [g, r] : rep.best_macro) {
      std::ostringstream s;
      s << "best " << g << ": " << r.key << " macro-F1 " << r.macro_f1 << ", best " << focus << " F1 "
        << rep.best_focus.at(g).focus_f1 << " (" << rep.best_focus.at(g).key << ")";
      log(s.str());
    }
  return rep;
}

}  // namespace ptx
