#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <opencv2/imgcodecs.hpp>

#include "ptx/imaging.hpp"
#include "ptx/rng.hpp"

using namespace ptx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / ("ptx_imaging_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

GrayImage ramp_x(int w, int h) {
  std::vector<double> v;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) v.push_back(x);
  return GrayImage(w, h, v);
}

}  // namespace

TEST(GrayImage, RejectsTooSmall) {
  EXPECT_THROW(GrayImage(1, 1, {0.0}), DimensionError);
  EXPECT_THROW(GrayImage(2, 3, std::vector<double>(6, 0.0)), DimensionError);
  EXPECT_NO_THROW(GrayImage::filled(3, 3, 0.0));
}

TEST(GrayImage, RejectsBadIntensities) {
  std::vector<double> v(9, 0.0);
  v[4] = 256.0;
  EXPECT_THROW(GrayImage(3, 3, v), FormatError);
  EXPECT_THROW(GrayImage(3, 3, std::vector<double>(8, 0.0)), DimensionError);
}

TEST(LoadGray, AllZeroPng) {
  auto path = scratch_dir() / "zero.png";
  cv::imwrite(path.string(), cv::Mat::zeros(3, 3, CV_8UC1));
  auto img = load_gray(path);
  EXPECT_EQ(img.width(), 3);
  EXPECT_EQ(img.height(), 3);
  for (double v : img.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(LoadGray, RedPixelUsesBt709Luma) {
  auto path = scratch_dir() / "red.png";
  cv::Mat m(3, 3, CV_8UC3, cv::Scalar(0, 0, 255));  // BGR
  cv::imwrite(path.string(), m);
  auto img = load_gray(path);
  EXPECT_NEAR(img.at(1, 1), 54.213, 1e-12);
}

TEST(LoadGray, SixteenBitRescaled) {
  auto path = scratch_dir() / "deep.png";
  cv::Mat m(4, 5, CV_16UC1, cv::Scalar(65535));
  m.at<std::uint16_t>(0, 0) = 0;
  cv::imwrite(path.string(), m);
  auto img = load_gray(path);
  EXPECT_EQ(img.width(), 5);
  EXPECT_EQ(img.height(), 4);
  EXPECT_DOUBLE_EQ(img.at(1, 0), 255.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0), 0.0);
}

TEST(LoadGray, JpegDecodes) {
  auto path = scratch_dir() / "flat.jpg";
  cv::imwrite(path.string(), cv::Mat(8, 8, CV_8UC1, cv::Scalar(100)));
  auto img = load_gray(path);
  EXPECT_EQ(img.width(), 8);
  EXPECT_NEAR(img.at(4, 4), 100.0, 2.0);
}

TEST(LoadGray, Errors) {
  EXPECT_THROW(load_gray(scratch_dir() / "missing.png"), IoError);
  auto junk = scratch_dir() / "junk.png";
  std::ofstream(junk) << "not an image";
  EXPECT_THROW(load_gray(junk), FormatError);
  auto tiny = scratch_dir() / "tiny.png";
  cv::imwrite(tiny.string(), cv::Mat::zeros(1, 1, CV_8UC1));
  EXPECT_THROW(load_gray(tiny), DimensionError);
}

TEST(LoadGray, Deterministic) {
  auto path = scratch_dir() / "noise.png";
  cv::Mat m(16, 16, CV_8UC1);
  cv::randu(m, 0, 255);
  cv::imwrite(path.string(), m);
  EXPECT_EQ(load_gray(path), load_gray(path));
}

TEST(SampleNeighbors, ConstantImageGivesConstants) {
  auto img = GrayImage::filled(9, 9, 7.0);
  for (auto spec : {NeighborhoodSpec{8, Circle{2.0}, 0.3}, NeighborhoodSpec{12, Ellipse{3.0, 1.0}, 0.0},
                    NeighborhoodSpec{4, Circle{1.5}, 1.0}}) {
    for (double c : {0.0, 4.0, 8.0, 3.3}) {
      auto s = sample_neighbors(img, c, c, spec);
      ASSERT_EQ(s.size(), static_cast<std::size_t>(spec.neighbor_count));
      for (double v : s) EXPECT_EQ(v, 7.0);
    }
  }
}

TEST(SampleNeighbors, AxialPointsReadPixelsExactly) {
  std::vector<double> v(25);
  for (int i = 0; i < 25; ++i) v[i] = i * 3.0;
  GrayImage img(5, 5, v);
  auto s = sample_neighbors(img, 2, 2, {4, Circle{1.0}, 0.0});
  // east, north (y-1), west, south
  EXPECT_EQ(s[0], img.at(3, 2));
  EXPECT_EQ(s[1], img.at(2, 1));
  EXPECT_EQ(s[2], img.at(1, 2));
  EXPECT_EQ(s[3], img.at(2, 3));
}

TEST(SampleNeighbors, ExactOnLinearRamp) {
  auto img = ramp_x(16, 16);
  const double cx = 7.0, cy = 6.0;
  auto s = sample_neighbors(img, cx, cy, {8, Circle{2.0}, 0.0});
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(s[i], cx + 2.0 * std::cos(2 * std::numbers::pi * i / 8), 1e-12);
}

TEST(SampleNeighbors, CenterOutsideImage) {
  auto img = GrayImage::filled(5, 5, 1.0);
  EXPECT_THROW(sample_neighbors(img, 5.0, 2.0, {}), BoundsError);
  EXPECT_THROW(sample_neighbors(img, -0.5, 2.0, {}), BoundsError);
  EXPECT_THROW(sample_neighbors(img, 2, 2, {3, Circle{1.0}, 0.0}), ParameterError);
}

TEST(Crop, IdentityAndCenterBlock) {
  std::vector<double> v(25);
  for (int i = 0; i < 25; ++i) v[i] = i;
  GrayImage img(5, 5, v);
  EXPECT_EQ(crop(img, 0, 0, 5, 5), img);
  auto c = crop(img, 1, 1, 3, 3);
  EXPECT_EQ(c.width(), 3);
  EXPECT_EQ(c.at(0, 0), 6.0);
  EXPECT_EQ(c.at(2, 2), 18.0);
  EXPECT_EQ(img.at(0, 0), 0.0);  // source untouched
}

TEST(Crop, Errors) {
  auto img = GrayImage::filled(5, 5, 1.0);
  EXPECT_THROW(crop(img, 0, 0, 6, 5), BoundsError);
  EXPECT_THROW(crop(img, 3, 3, 3, 3), BoundsError);
  EXPECT_THROW(crop(img, 0, 0, 2, 3), BoundsError);
}

TEST(Crop, NestedComposition) {
  Rng rng(5);
  std::vector<double> v(20 * 17);
  for (double& x : v) x = static_cast<double>(rng.index(256));
  GrayImage img(20, 17, v);
  for (int t = 0; t < 200; ++t) {
    int w1 = 3 + static_cast<int>(rng.index(18)), h1 = 3 + static_cast<int>(rng.index(15));
    int x1 = static_cast<int>(rng.index(21 - w1)), y1 = static_cast<int>(rng.index(18 - h1));
    int w2 = 3 + static_cast<int>(rng.index(w1 - 2)), h2 = 3 + static_cast<int>(rng.index(h1 - 2));
    int x2 = static_cast<int>(rng.index(w1 - w2 + 1)), y2 = static_cast<int>(rng.index(h1 - h2 + 1));
    EXPECT_EQ(crop(crop(img, x1, y1, w1, h1), x2, y2, w2, h2), crop(img, x1 + x2, y1 + y2, w2, h2));
  }
}
