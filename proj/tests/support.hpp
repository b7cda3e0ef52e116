#pragma once

// Shared fixtures for the unit tests: shape rasterizers, scratch
// directories and a small seeded generator.

#include "lesionkit/imaging.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace lesionkit::test {

//! Disk of radius r around (cx, cy): pixel centers within r.
inline BinaryMask
disk(int size, double r, double cx, double cy)
{
  BinaryMask m(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double dx = j + 0.5 - cx, dy = i + 0.5 - cy;
      m.set(i, j, dx * dx + dy * dy <= r * r);
    }
  return m;
}

inline BinaryMask
disk(int size, double r)
{
  return disk(size, r, size / 2.0, size / 2.0);
}

inline BinaryMask
rectangle(int width, int height, int top, int left, int rows, int cols)
{
  BinaryMask m(width, height);
  for (int i = top; i < top + rows; ++i)
    for (int j = left; j < left + cols; ++j)
      m.set(i, j, true);
  return m;
}

//! Random blob: union of a few ellipses, kept away from the border.
inline BinaryMask
random_blob(std::mt19937_64& rng, int size = 48)
{
  std::uniform_real_distribution<double> pos(size * 0.3, size * 0.7);
  std::uniform_real_distribution<double> rad(2.0, size * 0.2);
  std::uniform_real_distribution<double> ang(0.0, M_PI);
  BinaryMask m(size, size);
  const int parts = 1 + static_cast<int>(rng() % 4);
  for (int p = 0; p < parts; ++p) {
    const double cx = pos(rng), cy = pos(rng), a = rad(rng), b = rad(rng);
    const double t = ang(rng), c = std::cos(t), s = std::sin(t);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const double dx = j + 0.5 - cx, dy = i + 0.5 - cy;
        const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
        if (u * u + v * v <= 1.0)
          m.set(i, j, true);
      }
  }
  return m;
}

inline RasterImage
random_image(std::mt19937_64& rng, int width, int height)
{
  RasterImage img(width, height);
  for (auto& p : img.pixels)
    p = static_cast<std::uint8_t>(rng());
  return img;
}

//! Fresh scratch directory under the system temp dir.
inline std::filesystem::path
scratch_dir(const std::string& name)
{
  auto dir = std::filesystem::temp_directory_path() /
             ("lesionkit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace lesionkit::test
