#include <gtest/gtest.h>

#include <fstream>
#include <regex>

#include "ptx/pipeline/experiment.hpp"
#include "ptx/pipeline/synthetic.hpp"

using namespace ptx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ptx_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Shared small corpus: three labels, 32x32 textures.
const fs::path& small_corpus() {
  static const fs::path dir = [] {
    auto d = scratch("corpus");
    auto labels = rydls20_shaped_labels();
    std::vector<SyntheticLabel> pick{labels[0], labels[1], labels[3]};
    pick[0].count = 20;
    pick[1].count = 12;
    pick[2].count = 10;
    write_synthetic_corpus(d, 7, pick, 32);
    return d;
  }();
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto path = dir / "experiment.ini";
  std::ofstream(path) << "[data]\nmanifest = " << (small_corpus() / "manifest.csv").string() << "\ncache = "
                      << (small_corpus() / "cache").string() << "\n"
                      << body;
  return path;
}

const char* kGrid2x2x2 =
    "[descriptors]\nuse = LBP, LDN\nfusion_sizes =\n"
    "[flat]\nclassifiers = KNN3, DT\nresamplers = NONE, SMOTE\n"
    "[hierarchy]\nenabled = false\n"
    "[fusion]\nrules = SUM\ncriteria = top:5\n"
    "[run]\nseed = 11\nout = out\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string without_wall_time(std::string s) {
  return std::regex_replace(s, std::regex("\"wall_time\":[-0-9.eE+]+"), "");
}

}  // namespace

TEST(Config, ParsesAndRejects) {
  auto dir = scratch("config");
  auto cfg = load_config(write_config(dir, kGrid2x2x2));
  EXPECT_EQ(cfg.descriptors.size(), 2u);
  EXPECT_EQ(cfg.classifiers, (std::vector<std::string>{"KNN3", "DT"}));
  EXPECT_EQ(cfg.flat_resamplers.size(), 2u);
  EXPECT_FALSE(cfg.hierarchical);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_EQ(cfg.out_dir, dir / "out");
  EXPECT_EQ(cfg.focus_label, "COVID-19");

  EXPECT_THROW(load_config(write_config(dir, "[run]\nseed = 1\nbogus = 2\n")), SchemaError);
  EXPECT_THROW(load_config(write_config(dir, "[nowhere]\nx = 1\n")), SchemaError);
  EXPECT_THROW(load_config(write_config(dir, "[descriptors]\nuse = LBP\n[flat]\nclassifiers = KNN7\n")), ParameterError);
  auto unseeded = load_config(write_config(dir, "[descriptors]\nuse = LBP\n"));
  EXPECT_THROW(unseeded.require_seed(), UsageError);
  // ingested descriptors need their vector files
  EXPECT_THROW(load_config(write_config(dir, "[descriptors]\nuse = LETRIST\n[run]\nseed = 1\n")), SchemaError);
}

TEST(Grid, FullGridCellCountFollowsConfig) {
  Workspace w;
  for (auto id : kPaperDescriptors) w.cfg.descriptors.push_back(DescriptorConfig::defaults(id));
  w.cfg.flat_resamplers = w.cfg.hier_resamplers = all_resamplers();
  const auto sets = w.feature_sets();
  ASSERT_EQ(sets.size(), 8u + 84u);
  const auto g = grid_shape(w.cfg, sets.size());
  EXPECT_EQ(g.flat_cells, 92u * 6u * 10u);
  EXPECT_EQ(g.hier_cells, 92u * 10u);
  EXPECT_EQ(enumerate_cells(w).size(), g.flat_cells + g.hier_cells);
}

TEST(Extract, RerunIsServedFromCache) {
  auto dir = scratch("extract");
  auto cfg = load_config(write_config(dir, kGrid2x2x2));
  cfg.cache_dir = dir / "cache";
  std::vector<ExtractSummaryRow> first, second;
  open_workspace(cfg, {}, &first);
  open_workspace(cfg, {}, &second);
  ASSERT_EQ(first.size(), 2u);
  EXPECT_EQ(first[0].dim, 59u);
  EXPECT_EQ(first[1].dim, 56u);
  for (const auto& r : first) EXPECT_EQ(r.stats.decoded, 42u);
  for (const auto& r : second) {
    EXPECT_EQ(r.stats.decoded, 0u);
    EXPECT_EQ(r.stats.cache_hits, 42u);
  }
}

TEST(Grid, CardinalityResumeAndDeterminism) {
  auto a = scratch("grid_a"), b = scratch("grid_b"), c = scratch("grid_c");
  auto run = [](const fs::path& dir, bool resume) {
    const auto w = open_workspace(load_config(write_config(dir, kGrid2x2x2)), {});
    return run_grid(w, resume, {});
  };
  const auto sa = run(a, false);
  EXPECT_EQ(sa.planned, 8u);
  EXPECT_EQ(sa.failed, 0u);
  const auto ra = ResultLog(a / "out" / "results.jsonl").latest();
  ASSERT_EQ(ra.size(), 8u);
  for (const auto& [k, r] : ra) {
    EXPECT_TRUE(r.ok) << k << ": " << r.error;
    EXPECT_TRUE(fs::exists(a / "out" / r.scores_file));
    EXPECT_TRUE(r.val_macro_f1.has_value());
    EXPECT_GE(r.macro_f1, 0.0);
    EXPECT_LE(r.macro_f1, 1.0);
  }

  // interrupted run: keep three records plus a torn line, then resume
  run(b, false);
  {
    std::ifstream in(b / "out" / "results.jsonl");
    std::string line, kept;
    for (int i = 0; i < 3 && std::getline(in, line); ++i) kept += line + "\n";
    std::ofstream(b / "out" / "results.jsonl", std::ios::trunc) << kept << "{\"key\":\"flat|LD";
  }
  const auto sb = run(b, true);
  EXPECT_EQ(sb.skipped, 3u);
  EXPECT_EQ(sb.ran, 5u);
  EXPECT_EQ(slurp(a / "out" / "index.json"), slurp(b / "out" / "index.json"));

  run(c, false);
  EXPECT_EQ(without_wall_time(slurp(a / "out" / "results.jsonl")),
            without_wall_time(slurp(c / "out" / "results.jsonl")));
}

TEST(Grid, ScoreFilesReproduceReportedMetrics) {
  auto dir = scratch("audit");
  const auto w = open_workspace(load_config(write_config(dir, kGrid2x2x2)), {});
  run_grid(w, false, {});
  for (const auto& [k, r] : ResultLog(dir / "out" / "results.jsonl").latest()) {
    ExperimentResult again;
    evaluate_flat(read_score_table(dir / "out" / r.scores_file), w.cfg.focus_label, again);
    EXPECT_EQ(again.macro_f1, r.macro_f1) << k;
    EXPECT_EQ(again.focus_f1, r.focus_f1) << k;
    EXPECT_EQ(again.confusion.counts, r.confusion.counts) << k;
  }
}

TEST(Fuse, TopFiveSumIsOneResultMatchingStoredScores) {
  auto dir = scratch("fuse");
  // 7 single-descriptor cells: LBP x {KNN3,KNN5,DT,RF} + LDN x {KNN3,KNN5,DT}; early fusion off
  const char* body =
      "[descriptors]\nuse = LBP, LDN\nfusion_sizes =\n"
      "[flat]\nclassifiers = KNN3, KNN5, DT, RF\nresamplers = NONE\n"
      "[hierarchy]\nenabled = false\n"
      "[fusion]\nrules = SUM\ncriteria = top:5\nselect_on = test\n"
      "[run]\nseed = 3\nout = out\n";
  const auto w = open_workspace(load_config(write_config(dir, body)), {});
  run_grid(w, false, {});
  {
    // drop one cell so the index holds seven
    ResultLog log(dir / "out" / "results.jsonl");
    auto all = log.latest();
    all.erase("flat|LDN|RF|NONE");
    log.reset();
    for (const auto& [k, r] : all) log.append(r);
    ASSERT_EQ(log.latest().size(), 7u);
  }
  const auto s = run_fusion(w, false, {});
  EXPECT_EQ(s.planned, 1u);
  EXPECT_EQ(s.failed, 0u);
  const auto all = ResultLog(dir / "out" / "results.jsonl").latest();
  std::vector<ExperimentResult> late;
  for (const auto& [k, r] : all)
    if (r.fusion == "late") late.push_back(r);
  ASSERT_EQ(late.size(), 1u);
  const auto& f = late[0];
  ASSERT_EQ(f.members.size(), 5u);
  EXPECT_EQ(f.rule, "SUM");

  const auto fused = read_score_table(dir / "out" / f.scores_file);
  std::vector<ScoreTable> members;
  for (const auto& m : f.members) members.push_back(read_score_table(dir / "out" / all.at(m).scores_file));
  for (std::size_t i = 0; i < fused.size(); ++i) {
    std::vector<ScoreVector> in;
    for (const auto& t : members) in.push_back({t.labels, t.scores[i]});
    const auto want = late_fuse(in, FusionRule::SUM);
    EXPECT_EQ(fused.scores[i], want.scores.scores);
    EXPECT_EQ(fused.pred[i], want.label());
  }
  // resume leaves the fused result alone
  EXPECT_EQ(run_fusion(w, true, {}).skipped, 1u);
}

TEST(Fuse, SelectionErrorsAreReported) {
  auto dir = scratch("fuse_err");
  const char* body =
      "[descriptors]\nuse = LBP\nfusion_sizes =\n"
      "[flat]\nclassifiers = KNN3, DT\nresamplers = NONE\n"
      "[hierarchy]\nenabled = false\n"
      "[fusion]\nrules = SUM\ncriteria = top:5, feature:2\nselect_on = test\n"
      "[run]\nseed = 3\nout = out\n";
  const auto w = open_workspace(load_config(write_config(dir, body)), {});
  run_grid(w, false, {});
  const auto s = run_fusion(w, false, {});
  EXPECT_EQ(s.failed, 2u);  // only two scenarios and one descriptor group
}

TEST(Report, SingleResultTopsEveryTable) {
  auto dir = scratch("report_one");
  const char* body =
      "[descriptors]\nuse = LBP\nfusion_sizes =\n"
      "[flat]\nclassifiers = KNN3\nresamplers = NONE\n"
      "[hierarchy]\nenabled = false\n"
      "[run]\nseed = 5\nout = out\n";
  const auto w = open_workspace(load_config(write_config(dir, body)), {});
  run_grid(w, false, {});
  const auto rep = run_report(dir / "out", "COVID-19", {});
  ASSERT_EQ(rep.best_macro.size(), 1u);
  EXPECT_EQ(rep.best_macro.at("flat-single").key, "flat|LBP|KNN3|NONE");
  EXPECT_EQ(rep.best_focus.at("flat-single").key, "flat|LBP|KNN3|NONE");
  EXPECT_TRUE(rep.ranks.empty());
  const auto best = slurp(dir / "out" / "report" / "best_macro.csv");
  EXPECT_NE(best.find("f1_COVID-19"), std::string::npos);
  EXPECT_NE(best.find("flat|LBP|KNN3|NONE"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "report" / "per_label.csv"));

  auto empty = scratch("report_empty");
  EXPECT_THROW(run_report(empty, "COVID-19", {}), UsageError);
}

TEST(Report, RankTablesAndHierarchicalCells) {
  auto dir = scratch("report_rank");
  const char* body =
      "[descriptors]\nuse = LBP, LDN\nfusion_sizes =\n"
      "[flat]\nclassifiers = KNN3, DT\nresamplers = NONE, ENN\n"
      "[hierarchy]\nresamplers = ENN\niterations = 3\nf_levels = 0.05, 0.125\n"
      "[fusion]\nrules = SUM, VOTE\ncriteria = top:2, feature:2\n"
      "[run]\nseed = 9\nout = out\n";
  const auto w = open_workspace(load_config(write_config(dir, body)), {});
  const auto g = run_grid(w, false, {});
  EXPECT_EQ(g.planned, 2u * 2 * 2 + 2u);
  EXPECT_EQ(g.failed, 0u);
  const auto f = run_fusion(w, false, {});
  // flat: top2 + feature2, hierarchical: top2 + feature2, two rules each
  EXPECT_EQ(f.planned, 8u);
  EXPECT_EQ(f.failed, 0u);
  const auto rep = run_report(dir / "out", "COVID-19", {});
  for (const auto* group : {"flat-single", "flat-late", "hier-single", "hier-late"})
    EXPECT_TRUE(rep.best_macro.count(group)) << group;
  ASSERT_TRUE(rep.ranks.count("features"));
  EXPECT_EQ(rep.ranks.at("features").methods, (std::vector<std::string>{"LBP", "LDN"}));
  EXPECT_EQ(rep.ranks.at("features").contexts.size(), 4u);
  ASSERT_TRUE(rep.ranks.count("classifiers"));
  EXPECT_EQ(rep.ranks.at("classifiers").methods, (std::vector<std::string>{"KNN", "DT"}));
  EXPECT_FALSE(rep.ranks.count("resamplers"));  // ENN alone: NONE is not ranked

  for (const auto& [k, r] : ResultLog(dir / "out" / "results.jsonl").latest())
    if (r.schema == "hier" && r.ok) {
      const auto t = read_score_table(dir / "out" / r.scores_file);
      const auto tax = rydls20_taxonomy();
      for (const auto& v : t.scores) EXPECT_TRUE(is_hierarchy_consistent(v, tax)) << k;
      EXPECT_EQ(r.confusion.labels.size(), 14u);
    }
}
