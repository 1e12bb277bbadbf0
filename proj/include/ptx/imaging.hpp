#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ptx/error.hpp"

namespace ptx {

/// Immutable grayscale raster, row-major, intensities in [0, 255].
class GrayImage {
public:
  static constexpr int kMinSide = 3;

  GrayImage(int width, int height, std::vector<double> intensities)
      : width_(width), height_(height), data_(std::move(intensities)) {
    if (width < kMinSide || height < kMinSide)
      throw DimensionError("image must be at least 3x3, got " + std::to_string(width) + "x" +
                           std::to_string(height));
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw DimensionError("intensity count does not match width*height");
    for (double v : data_)
      if (!std::isfinite(v) || v < 0.0 || v > 255.0)
        throw FormatError("intensity outside [0, 255]");
  }

  /// Constant-valued image.
  static GrayImage filled(int width, int height, double value) {
    return GrayImage(width, height,
                     std::vector<double>(static_cast<std::size_t>(width) * height, value));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> pixels() const noexcept { return data_; }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Replicate-edge access.
  double at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return at(x, y);
  }

  double min_intensity() const { return *std::min_element(data_.begin(), data_.end()); }

  bool operator==(const GrayImage&) const = default;

private:
  int width_;
  int height_;
  std::vector<double> data_;
};

struct Circle {
  double radius = 1.0;
};

struct Ellipse {
  double semi_x = 1.0;  // semi-axis along image x
  double semi_y = 1.0;  // semi-axis along image y
};

struct NeighborhoodSpec {
  int neighbor_count = 8;
  std::variant<Circle, Ellipse> topology = Circle{1.0};
  double angular_offset = 0.0;

  void validate() const {
    if (neighbor_count < 4) throw ParameterError("neighborhood needs at least 4 neighbors");
    std::visit(
        [](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, Circle>) {
            if (!(t.radius > 0)) throw ParameterError("radius must be positive");
          } else {
            if (!(t.semi_x > 0 && t.semi_y > 0)) throw ParameterError("semi-axes must be positive");
          }
        },
        topology);
  }
};

struct Offset {
  double dx;
  double dy;
};

namespace detail {

// Snap values within 1e-9 of an integer so grid-aligned neighbors read
// pixels exactly.
inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace detail

/// Resolution at which descriptors compare real-valued responses. Values
/// are rounded to this grid first so quantities that are equal in exact
/// arithmetic compare equal regardless of summation order.
inline constexpr double kCompareResolution = 1e-9;

inline double settle(double v) { return std::round(v / kCompareResolution) * kCompareResolution; }

/// Neighbor offsets relative to the center, counter-clockwise on screen
/// (image y grows downward) starting at the angular offset.
inline std::vector<Offset> neighbor_offsets(const NeighborhoodSpec& spec) {
  spec.validate();
  double ax = 0, ay = 0;
  if (const auto* c = std::get_if<Circle>(&spec.topology)) {
    ax = ay = c->radius;
  } else {
    const auto& e = std::get<Ellipse>(spec.topology);
    ax = e.semi_x;
    ay = e.semi_y;
  }
  std::vector<Offset> out;
  out.reserve(static_cast<std::size_t>(spec.neighbor_count));
  for (int i = 0; i < spec.neighbor_count; ++i) {
    const double theta = spec.angular_offset + 2.0 * std::numbers::pi * i / spec.neighbor_count;
    out.push_back({detail::snap(ax * std::cos(theta)), detail::snap(-ay * std::sin(theta))});
  }
  return out;
}

/// Bilinear sample at real coordinates with replicate-edge borders. The
/// lerp form keeps constant neighborhoods exact.
inline double sample_bilinear(const GrayImage& img, double x, double y) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double tx = x - fx0;
  const double ty = y - fy0;
  const double v00 = img.at_clamped(x0, y0);
  if (tx == 0.0 && ty == 0.0) return v00;
  const double v10 = img.at_clamped(x0 + 1, y0);
  const double v01 = img.at_clamped(x0, y0 + 1);
  const double v11 = img.at_clamped(x0 + 1, y0 + 1);
  const double top = v00 + tx * (v10 - v00);
  const double bottom = v01 + tx * (v11 - v01);
  return top + ty * (bottom - top);
}

/// Bilinear sample of (I - reference). Descriptors compare neighbors with a
/// center value through this, which keeps codes exactly invariant to
/// integer gray-level shifts.
inline double sample_bilinear_relative(const GrayImage& img, double x, double y, double reference) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double tx = x - fx0;
  const double ty = y - fy0;
  const double v00 = img.at_clamped(x0, y0) - reference;
  if (tx == 0.0 && ty == 0.0) return v00;
  const double v10 = img.at_clamped(x0 + 1, y0) - reference;
  const double v01 = img.at_clamped(x0, y0 + 1) - reference;
  const double v11 = img.at_clamped(x0 + 1, y0 + 1) - reference;
  const double top = v00 + tx * (v10 - v00);
  const double bottom = v01 + tx * (v11 - v01);
  return top + ty * (bottom - top);
}

/// Intensities at the P neighborhood points around (cx, cy).
inline std::vector<double> sample_neighbors(const GrayImage& img, double cx, double cy,
                                            const NeighborhoodSpec& spec) {
  if (!(cx >= 0 && cy >= 0 && cx <= img.width() - 1 && cy <= img.height() - 1))
    throw BoundsError("neighborhood center outside image");
  std::vector<double> out;
  for (const auto& o : neighbor_offsets(spec))
    out.push_back(sample_bilinear(img, cx + o.dx, cy + o.dy));
  return out;
}

inline GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h) {
  if (w < GrayImage::kMinSide || h < GrayImage::kMinSide)
    throw BoundsError("crop must be at least 3x3");
  if (x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height())
    throw BoundsError("crop rectangle outside image");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(w) * h);
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) out.push_back(img.at(x, y));
  return GrayImage(w, h, std::move(out));
}

// BT.709 luma weights.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

inline double luminance(double r, double g, double b) { return kLumaR * r + kLumaG * g + kLumaB * b; }

/// Converts a decoded 8/16-bit raster with 1, 3 or 4 (BGR[A]) channels.
inline GrayImage gray_from_mat(const cv::Mat& mat) {
  if (mat.empty()) throw FormatError("empty raster");
  double scale = 1.0;
  if (mat.depth() == CV_8U)
    scale = 1.0;
  else if (mat.depth() == CV_16U)
    scale = 255.0 / 65535.0;
  else
    throw FormatError("unsupported pixel depth");
  const int ch = mat.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw FormatError("unsupported channel count");
  if (mat.cols < GrayImage::kMinSide || mat.rows < GrayImage::kMinSide)
    throw DimensionError("image must be at least 3x3");

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(mat.rows) * mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) {
      auto channel = [&](int c) -> double {
        if (mat.depth() == CV_8U) return mat.ptr<std::uint8_t>(y)[x * ch + c];
        return mat.ptr<std::uint16_t>(y)[x * ch + c];
      };
      double v = ch == 1 ? channel(0) : luminance(channel(2), channel(1), channel(0));
      out.push_back(std::clamp(v * scale, 0.0, 255.0));
    }
  }
  return GrayImage(mat.cols, mat.rows, std::move(out));
}

inline GrayImage load_gray(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw IoError("cannot read image: " + path.string());
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw FormatError("cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) throw FormatError("unsupported or corrupt raster: " + path.string());
  return gray_from_mat(mat);
}

/// Writes an 8-bit grayscale PNG (rounded). Used by tooling and tests.
inline void save_gray_png(const GrayImage& img, const std::filesystem::path& path) {
  cv::Mat mat(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      mat.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(img.at(x, y)));
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write " + path.string());
}

}  // namespace ptx
