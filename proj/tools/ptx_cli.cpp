// ptx: batch driver for extraction, splitting, the experiment grid, late
// fusion and reporting.

#include <CLI11.hpp>

#include <iostream>

#include "ptx/pipeline/experiment.hpp"
#include "ptx/pipeline/synthetic.hpp"

namespace {

enum Exit { kOk = 0, kCellFailures = 1, kUsage = 2, kError = 3 };

struct Options {
  std::string config;
  std::string out;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  std::string focus;
  int size = 64;
};

ptx::ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw ptx::UsageError("--config is required");
  auto cfg = ptx::load_config(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.workers > 0) cfg.workers = static_cast<unsigned>(o.workers);
  if (o.seed) cfg.seed = o.seed;
  if (!o.focus.empty()) cfg.focus_label = o.focus;
  cfg.require_seed();
  return cfg;
}

int cmd_extract(const Options& o) {
  const auto cfg = load(o);
  std::vector<ptx::ExtractSummaryRow> rows;
  const auto w = ptx::open_workspace(cfg, ptx::stderr_log, &rows);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"descriptor", r.name},
                 {"dim", r.dim},
                 {"samples", w.samples.size()},
                 {"decoded", r.stats.decoded},
                 {"cache_hits", r.stats.cache_hits},
                 {"seconds", r.seconds}});
    std::cout << r.name << "\tdim " << r.dim << "\tdecoded " << r.stats.decoded << "\tcache hits "
              << r.stats.cache_hits << '\n';
  }
  ptx::write_text_atomic(cfg.out_dir / "extract.json", j.dump(1) + "\n");
  return kOk;
}

int cmd_split(const Options& o) {
  const auto cfg = load(o);
  const auto tax = cfg.load_taxonomy();
  const auto samples = ptx::prepare_samples(cfg, tax, cfg.require_seed());
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = cfg.out_dir / "manifest.split.csv";
  ptx::write_manifest(path, samples);
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& s : samples) (s.split == ptx::Split::Train ? counts[s.label].first : counts[s.label].second)++;
  std::cout << "label\ttrain\ttest\n";
  for (const auto& [label, c] : counts) std::cout << label << '\t' << c.first << '\t' << c.second << '\n';
  std::clog << "wrote " << path.string() << '\n';
  return kOk;
}

int cmd_grid(const Options& o) {
  const auto cfg = load(o);
  const auto w = ptx::open_workspace(cfg);
  const auto s = ptx::run_grid(w, o.resume);
  std::cout << "cells " << s.planned << ", ran " << s.ran << ", skipped " << s.skipped << ", failed " << s.failed
            << '\n';
  return s.failed ? kCellFailures : kOk;
}

int cmd_fuse(const Options& o) {
  const auto cfg = load(o);
  const auto w = ptx::open_workspace(cfg, {});
  const auto s = ptx::run_fusion(w, o.resume);
  std::cout << "fusion candidates " << s.planned << ", ran " << s.ran << ", skipped " << s.skipped << ", failed "
            << s.failed << '\n';
  return s.failed ? kCellFailures : kOk;
}

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw ptx::UsageError("synth needs --out");
  const auto manifest = ptx::write_synthetic_corpus(o.out, o.seed.value_or(1), ptx::rydls20_shaped_labels(), o.size);
  std::cout << "wrote " << manifest.string() << '\n';
  return kOk;
}

int cmd_report(const Options& o) {
  std::filesystem::path out = o.out;
  std::string focus = o.focus;
  if (!o.config.empty()) {
    const auto cfg = ptx::load_config(o.config);
    if (out.empty()) out = cfg.out_dir;
    if (focus.empty()) focus = cfg.focus_label;
  }
  if (out.empty()) throw ptx::UsageError("report needs --out or --config");
  if (focus.empty()) focus = "COVID-19";
  const auto rep = ptx::run_report(out, focus);
  for (const auto& [name, t] : rep.ranks) {
    std::cout << "rank table " << name << " (" << t.methods.size() << "x" << t.contexts.size() << ")\n";
    for (std::size_t m = 0; m < t.methods.size(); ++m) std::cout << "  " << t.methods[m] << '\t' << t.mean_rank[m] << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ptx: texture-feature pneumonia classification experiments"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (INI)");
    sub->add_option("--out", o.out, "output directory (overrides [run] out)");
    sub->add_option("--workers", o.workers, "concurrent workers")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "global seed (overrides [run] seed)");
    sub->add_flag("--resume", o.resume, "skip cells already completed under the same digest");
    sub->add_option("--focus-label", o.focus, "label reported next to macro-F1 (default COVID-19)");
  };
  auto* extract = app.add_subcommand("extract", "compute and cache every configured descriptor");
  auto* split = app.add_subcommand("split", "assign a stratified train/test holdout and write the manifest");
  auto* grid = app.add_subcommand("grid", "run the flat and hierarchical experiment grid");
  auto* fuse = app.add_subcommand("fuse", "late-fuse selected scenarios");
  auto* report = app.add_subcommand("report", "best-result, per-label and Friedman rank tables");
  auto* synth = app.add_subcommand("synth", "write the 7-label synthetic texture corpus and its manifest");
  for (auto* s : {extract, split, grid, fuse, report, synth}) common(s);
  synth->add_option("--size", o.size, "image side in pixels")->check(CLI::Range(16, 1024));

  CLI11_PARSE(app, argc, argv);
  for (auto* s : {extract, split, grid, fuse, report, synth})
    if (s->parsed() && s->count("--seed")) o.seed = seed;

  try {
    if (extract->parsed()) return cmd_extract(o);
    if (split->parsed()) return cmd_split(o);
    if (grid->parsed()) return cmd_grid(o);
    if (fuse->parsed()) return cmd_fuse(o);
    if (synth->parsed()) return cmd_synth(o);
    return cmd_report(o);
  } catch (const ptx::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ptx::SchemaError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ptx::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
