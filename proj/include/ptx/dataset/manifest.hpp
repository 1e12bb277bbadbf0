#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ptx/dataset/taxonomy.hpp"
#include "ptx/error.hpp"
#include "ptx/rng.hpp"

namespace ptx {

enum class Split { Unassigned, Train, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unassigned: return "";
  }
  return "";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s.empty() || s == "unassigned") return Split::Unassigned;
  throw SchemaError("unknown split '" + std::string(s) + "'");
}

struct Sample {
  std::string sample_id;
  std::filesystem::path image_path;
  std::string label;  // full label path
  Split split = Split::Unassigned;
};

/// Splits one CSV record. Fields may be double-quoted; "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw SchemaError("unterminated quote in CSV line");
  out.push_back(cur);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

/// Reads `sample_id,image_path,label_path[,split]`. Relative image paths
/// resolve against the manifest's directory.
inline std::vector<Sample> parse_manifest(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("manifest is empty");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"sample_id", "image_path", "label_path"})
    if (!col.count(need)) throw SchemaError(std::string("manifest header lacks ") + need);
  const bool has_split = col.count("split") > 0;
  const auto base = path.parent_path();

  std::vector<Sample> out;
  std::set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw SchemaError("manifest line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields");
    Sample s;
    s.sample_id = f[col["sample_id"]];
    if (s.sample_id.empty()) throw SchemaError("manifest line " + std::to_string(lineno) + ": empty sample_id");
    if (!ids.insert(s.sample_id).second) throw SchemaError("duplicate sample_id " + s.sample_id);
    std::filesystem::path p = f[col["image_path"]];
    s.image_path = p.is_relative() ? base / p : p;
    s.label = f[col["label_path"]];
    if (!taxonomy.contains(s.label))
      throw SchemaError("manifest line " + std::to_string(lineno) + ": unknown label path '" + s.label + "'");
    if (has_split) s.split = parse_split(f[col["split"]]);
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "sample_id,image_path,label_path,split\n";
  for (const auto& s : samples)
    out << csv_field(s.sample_id) << ',' << csv_field(s.image_path.string()) << ',' << csv_field(s.label) << ','
        << split_name(s.split) << '\n';
}

/// Training-set size for a label with n samples.
inline std::size_t holdout_train_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * ratio - 1e-9));
}

/// Per-label random holdout over the unassigned samples; samples that
/// already carry a split are left alone.
inline std::vector<Sample> stratified_holdout(std::vector<Sample> samples, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ParameterError("holdout ratio must lie in [0, 1]");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == Split::Unassigned) by_label[samples[i].label].push_back(i);
  for (auto& [label, idx] : by_label) {
    if (idx.size() < 2)
      throw StratificationError("label '" + label + "' has a single sample and cannot be stratified");
    Rng rng(derive_seed(seed, label));
    rng.shuffle(idx);
    const std::size_t n_train = holdout_train_count(idx.size(), ratio);
    for (std::size_t k = 0; k < idx.size(); ++k) samples[idx[k]].split = k < n_train ? Split::Train : Split::Test;
  }
  return samples;
}

}  // namespace ptx
