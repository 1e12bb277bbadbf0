#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ptx/error.hpp"

namespace ptx {

inline constexpr char kPathSeparator = '/';

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = path.find(kPathSeparator, start);
    out.emplace_back(path.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string join_path(const std::vector<std::string>& segments, std::size_t count) {
  std::string s;
  for (std::size_t i = 0; i < count && i < segments.size(); ++i) {
    if (i) s += kPathSeparator;
    s += segments[i];
  }
  return s;
}

/// Rooted label tree. Nodes are identified by their full path; the root is
/// implicit and has no index. Node indices follow lexicographic path order.
class Taxonomy {
public:
  struct Node {
    std::string path;
    std::string name;
    int parent = -1;  // -1 for children of the root
    int depth = 1;    // root children have depth 1
    std::vector<int> children;
  };

  static Taxonomy from_paths(const std::vector<std::string>& lines) {
    std::map<std::string, int> seen;
    for (const auto& raw : lines) {
      const auto segs = split_path(raw);
      for (const auto& s : segs)
        if (s.empty()) throw SchemaError("malformed label path '" + raw + "'");
      for (std::size_t d = 1; d <= segs.size(); ++d) seen.emplace(join_path(segs, d), 0);
    }
    if (seen.empty()) throw SchemaError("taxonomy has no label paths");
    Taxonomy t;
    for (auto& [path, idx] : seen) {
      idx = static_cast<int>(t.nodes_.size());
      const auto segs = split_path(path);
      Node n;
      n.path = path;
      n.name = segs.back();
      n.depth = static_cast<int>(segs.size());
      if (segs.size() > 1) n.parent = seen.at(join_path(segs, segs.size() - 1));
      t.nodes_.push_back(std::move(n));
      t.index_.emplace(path, idx);
    }
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
      const int p = t.nodes_[i].parent;
      if (p < 0)
        t.roots_.push_back(static_cast<int>(i));
      else
        t.nodes_[static_cast<std::size_t>(p)].children.push_back(static_cast<int>(i));
    }
    return t;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<int>& root_children() const noexcept { return roots_; }

  const std::vector<int>& children(int i) const { return i < 0 ? roots_ : node(i).children; }

  std::optional<int> find(std::string_view path) const {
    auto it = index_.find(std::string(path));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view path) const { return find(path).has_value(); }

  int require(std::string_view path) const {
    auto i = find(path);
    if (!i) throw SchemaError("label path not in taxonomy: " + std::string(path));
    return *i;
  }

  /// Every node path, in index order.
  std::vector<std::string> label_paths() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) out.push_back(n.path);
    return out;
  }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].children.empty()) out.push_back(static_cast<int>(i));
    return out;
  }

  /// The node and all its ancestors, deepest first.
  std::vector<int> lineage(int i) const {
    std::vector<int> out;
    for (; i >= 0; i = node(i).parent) out.push_back(i);
    return out;
  }

  bool is_ancestor_or_self(int ancestor, int i) const {
    for (; i >= 0; i = node(i).parent)
      if (i == ancestor) return true;
    return false;
  }

private:
  std::vector<Node> nodes_;
  std::vector<int> roots_;
  std::map<std::string, int> index_;
};

inline Taxonomy parse_taxonomy_text(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    lines.push_back(line.substr(b));
  }
  if (lines.empty()) throw SchemaError("taxonomy file is empty");
  return Taxonomy::from_paths(lines);
}

inline Taxonomy parse_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read taxonomy " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_taxonomy_text(ss.str());
}

/// The pneumonia taxonomy of RYDLS-20 (leaf paths; internal nodes implied).
inline constexpr std::string_view kRydls20Taxonomy =
    "Normal\n"
    "Pneumonia/Acellular/Viral/Coronavirus/COVID-19\n"
    "Pneumonia/Acellular/Viral/Coronavirus/MERS\n"
    "Pneumonia/Acellular/Viral/Coronavirus/SARS\n"
    "Pneumonia/Acellular/Viral/Varicella\n"
    "Pneumonia/Celullar/Bacterial/Streptococcus\n"
    "Pneumonia/Celullar/Fungus/Pneumocystis\n";

inline Taxonomy rydls20_taxonomy() { return parse_taxonomy_text(std::string(kRydls20Taxonomy)); }

}  // namespace ptx
