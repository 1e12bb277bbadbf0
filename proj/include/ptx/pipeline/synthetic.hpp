#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ptx/dataset/manifest.hpp"
#include "ptx/error.hpp"
#include "ptx/rng.hpp"

namespace ptx {

enum class TextureFamily { Grating, Checkerboard, Blobs, Noise, Dots };

struct SyntheticLabel {
  std::string path;
  std::size_t count = 0;
  TextureFamily family = TextureFamily::Grating;
  double scale = 8;  // grating period, checker cell size, blob radius or dot spacing, in pixels
  std::optional<double> angle;  // fixed grating orientation in radians; random when unset
};

/// RYDLS-20 label counts with one texture per label. Each label's LBP
/// histogram sits apart from the others in raw Euclidean distance.
inline std::vector<SyntheticLabel> rydls20_shaped_labels() {
  constexpr double kVertical = 1.57079632679489661923;
  return {
      {"Normal", 1000, TextureFamily::Grating, 16, {}},
      {"Pneumonia/Acellular/Viral/Coronavirus/COVID-19", 90, TextureFamily::Checkerboard, 4, {}},
      {"Pneumonia/Acellular/Viral/Coronavirus/MERS", 10, TextureFamily::Checkerboard, 1, {}},
      {"Pneumonia/Acellular/Viral/Coronavirus/SARS", 11, TextureFamily::Noise, 1, {}},
      {"Pneumonia/Acellular/Viral/Varicella", 10, TextureFamily::Checkerboard, 2, {}},
      {"Pneumonia/Celullar/Bacterial/Streptococcus", 12, TextureFamily::Blobs, 2, {}},
      {"Pneumonia/Celullar/Fungus/Pneumocystis", 11, TextureFamily::Grating, 3, kVertical},
  };
}

/// One 8-bit texture with random phase (and orientation unless fixed) plus
/// mild pixel noise.
inline cv::Mat synthetic_texture(const SyntheticLabel& l, int size, Rng& rng) {
  constexpr double kPi = 3.14159265358979323846;
  cv::Mat img(size, size, CV_8U);
  std::vector<double> v(static_cast<std::size_t>(size * size));
  const double theta = l.angle ? *l.angle + rng.uniform(-0.1, 0.1) : rng.uniform(0, kPi);
  const double phase = rng.uniform(0, 2 * kPi);
  const int ox = static_cast<int>(rng.index(64)), oy = static_cast<int>(rng.index(64));
  std::vector<std::array<double, 2>> centres;
  if (l.family == TextureFamily::Blobs) {
    const auto n = static_cast<std::size_t>(size * size / (l.scale * l.scale * 4));
    for (std::size_t i = 0; i < n; ++i) centres.push_back({rng.uniform(0, size), rng.uniform(0, size)});
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double s = 0;
      switch (l.family) {
        case TextureFamily::Grating:
          s = std::sin(2 * kPi * (x * std::cos(theta) + y * std::sin(theta)) / l.scale + phase);
          break;
        case TextureFamily::Checkerboard: {
          const int cx = static_cast<int>(std::floor((x + ox) / l.scale));
          const int cy = static_cast<int>(std::floor((y + oy) / l.scale));
          s = ((cx + cy) % 2 == 0) ? 1.0 : -1.0;
          break;
        }
        case TextureFamily::Blobs: {
          s = -1;
          for (const auto& c : centres) {
            const double d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]);
            s += 2 * std::exp(-d2 / (2 * l.scale * l.scale));
          }
          s = std::tanh(s);
          break;
        }
        case TextureFamily::Noise:
          s = rng.uniform(-1, 1);
          break;
        case TextureFamily::Dots:
          s = rng.uniform() < 1 / (l.scale * l.scale) ? 1.0 : -1.0;
          break;
      }
      v[static_cast<std::size_t>(y * size + x)] = 128 + 90 * s + 2 * rng.normal();
    }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::clamp(std::lround(v[static_cast<std::size_t>(y * size + x)]), 0L, 255L));
  return img;
}

/// Writes PNGs plus `manifest.csv` (no split column) under `dir` and
/// returns the manifest path.
inline std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, std::uint64_t seed,
                                                    const std::vector<SyntheticLabel>& labels = rydls20_shaped_labels(),
                                                    int size = 64) {
  std::filesystem::create_directories(dir / "images");
  std::vector<Sample> samples;
  for (const auto& l : labels) {
    Rng rng(derive_seed(seed, l.path));
    const auto leaf = l.path.substr(l.path.rfind('/') + 1);
    for (std::size_t i = 0; i < l.count; ++i) {
      const std::string id = leaf + "-" + std::to_string(i);
      const auto rel = std::filesystem::path("images") / (id + ".png");
      if (!cv::imwrite((dir / rel).string(), synthetic_texture(l, size, rng)))
        throw IoError("cannot write " + (dir / rel).string());
      samples.push_back({id, rel, l.path, Split::Unassigned});
    }
  }
  std::ofstream out(dir / "manifest.csv");
  out << "sample_id,image_path,label_path\n";
  for (const auto& s : samples) out << csv_field(s.sample_id) << ',' << csv_field(s.image_path.string()) << ',' << csv_field(s.label) << '\n';
  if (!out) throw IoError("cannot write manifest under " + dir.string());
  return dir / "manifest.csv";
}

}  // namespace ptx
