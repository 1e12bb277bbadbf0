#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ptx/imaging.hpp"
#include "ptx/rng.hpp"

namespace testing_util {

/// Fresh per-process scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ptx_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ptx::GrayImage random_image(ptx::Rng& rng, int w, int h, std::vector<double> levels = {}) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (double& x : v)
    x = levels.empty() ? static_cast<double>(rng.index(256)) : levels[rng.index(levels.size())];
  return ptx::GrayImage(w, h, v);
}

inline ptx::GrayImage shifted(const ptx::GrayImage& img, double c) {
  std::vector<double> v(img.pixels().begin(), img.pixels().end());
  for (double& x : v) x += c;
  return ptx::GrayImage(img.width(), img.height(), v);
}

}  // namespace testing_util
