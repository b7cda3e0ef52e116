#include "support.hpp"

#include "lesionkit/error.hpp"
#include "lesionkit/imaging.hpp"

#include <doctest.h>

#include <cstdio>
#include <jpeglib.h>

#include <cmath>
#include <queue>
#include <random>

using namespace lesionkit;
using namespace lesionkit::test;

namespace {

std::vector<std::uint8_t>
encode_jpeg(const RasterImage& img, int quality)
{
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(
      img.pixels.data() + 3 * static_cast<std::size_t>(cinfo.next_scanline) * img.width);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

//! 8-connected check by flood fill from the first true pixel.
bool
is_connected(const BinaryMask& m)
{
  std::vector<std::uint8_t> seen(m.bits.size(), 0);
  std::queue<std::pair<int, int>> q;
  for (int i = 0; i < m.height && q.empty(); ++i)
    for (int j = 0; j < m.width && q.empty(); ++j)
      if (m.at(i, j)) {
        q.emplace(i, j);
        seen[static_cast<std::size_t>(i) * m.width + j] = 1;
      }
  std::size_t reached = 0;
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop();
    ++reached;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        const int a = i + di, b = j + dj;
        if (m.contains(a, b) && !seen[static_cast<std::size_t>(a) * m.width + b]) {
          seen[static_cast<std::size_t>(a) * m.width + b] = 1;
          q.emplace(a, b);
        }
      }
  }
  return reached == m.area();
}

} // namespace

TEST_CASE("decode_image reads PNG pixels as stored")
{
  RasterImage img(2, 1);
  img.set(0, 0, { 0, 0, 0 });
  img.set(0, 1, { 255, 255, 255 });
  const auto decoded = decode_image(encode_png(img));
  CHECK(decoded == img);
}

TEST_CASE("decode_image replicates grayscale across channels")
{
  BinaryMask m(3, 1);
  m.set(0, 1, true);
  const auto decoded = decode_image(encode_png(m));
  CHECK(decoded.at(0, 0) == std::array<std::uint8_t, 3>{ 0, 0, 0 });
  CHECK(decoded.at(0, 1) == std::array<std::uint8_t, 3>{ 255, 255, 255 });
}

TEST_CASE("truncated or foreign payloads fail to decode")
{
  std::mt19937_64 rng(3);
  const auto png = encode_png(random_image(rng, 32, 32));
  std::vector<std::uint8_t> cut(png.begin(), png.begin() + png.size() / 2);
  CHECK_THROWS_AS(decode_image(cut), Error);

  RasterImage solid(16, 16);
  const auto jpg = encode_jpeg(solid, 90);
  std::vector<std::uint8_t> jcut(jpg.begin(), jpg.begin() + jpg.size() / 2);
  CHECK_THROWS_AS(decode_image(jcut), Error);

  const std::vector<std::uint8_t> text = { 'h', 'e', 'l', 'l', 'o' };
  CHECK_THROWS_AS(decode_image(text), Error);
  CHECK_THROWS_AS(decode_image(std::vector<std::uint8_t>{}), Error);
}

TEST_CASE("JPEG of a solid color decodes within 2 levels per channel")
{
  const std::array<std::uint8_t, 3> color = { 37, 142, 201 };
  RasterImage img(40, 24);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      img.set(i, j, color);
  const auto decoded = decode_image(encode_jpeg(img, 95));
  REQUIRE(decoded.width == 40);
  REQUIRE(decoded.height == 24);
  int worst = 0;
  for (int i = 0; i < decoded.height; ++i)
    for (int j = 0; j < decoded.width; ++j)
      for (int c = 0; c < 3; ++c)
        worst = std::max(worst, std::abs(int(decoded.at(i, j)[c]) - int(color[c])));
  CHECK(worst <= 2);
}

TEST_CASE("decode_mask thresholds luma at 127")
{
  RasterImage white(4, 3), black(4, 3), checker(4, 4);
  std::fill(white.pixels.begin(), white.pixels.end(), 255);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const std::uint8_t v = (i + j) % 2 ? 255 : 0;
      checker.set(i, j, { v, v, v });
    }
  CHECK(decode_mask(encode_png(white)).area() == 12);
  CHECK(decode_mask(encode_png(black)).area() == 0);
  const auto m = decode_mask(encode_png(checker));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(m.at(i, j) == ((i + j) % 2 == 1));

  // luma of (128,128,127) rounds to 128 -> lesion; (127,127,127) does not
  RasterImage edge(2, 1);
  edge.set(0, 0, { 128, 128, 127 });
  edge.set(0, 1, { 127, 127, 127 });
  const auto e = binarize(edge);
  CHECK(e.at(0, 0));
  CHECK_FALSE(e.at(0, 1));
}

TEST_CASE("largest_component")
{
  SUBCASE("single blob unchanged")
  {
    const auto d = disk(30, 8);
    CHECK(largest_component(d) == d);
  }
  SUBCASE("10 and 3 pixel blobs")
  {
    auto m = rectangle(20, 20, 2, 2, 2, 5);
    for (int j = 12; j < 15; ++j)
      m.set(15, j, true);
    const auto lc = largest_component(m);
    CHECK(lc.area() == 10);
    CHECK(lc.at(2, 2));
    CHECK_FALSE(lc.at(15, 12));
  }
  SUBCASE("tie keeps the first blob in scan order")
  {
    BinaryMask m(20, 20);
    for (int j = 10; j < 15; ++j)
      m.set(1, j, true); // first in scan order
    for (int j = 0; j < 5; ++j)
      m.set(10, j, true);
    const auto lc = largest_component(m);
    CHECK(lc.area() == 5);
    CHECK(lc.at(1, 10));
  }
  SUBCASE("diagonal neighbours connect")
  {
    BinaryMask m(5, 5);
    m.set(0, 0, true);
    m.set(1, 1, true);
    m.set(2, 2, true);
    CHECK(largest_component(m).area() == 3);
  }
  SUBCASE("empty mask")
  {
    CHECK_THROWS_WITH_AS(largest_component(BinaryMask(4, 4)), "empty mask", Error);
  }
  SUBCASE("property: subset of the input and 8-connected")
  {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
      BinaryMask m(24, 24);
      for (auto& b : m.bits)
        b = rng() % 3 == 0;
      if (m.area() == 0)
        continue;
      const auto lc = largest_component(m);
      for (std::size_t k = 0; k < m.bits.size(); ++k)
        CHECK((!lc.bits[k] || m.bits[k]));
      CHECK(is_connected(lc));
    }
  }
}

TEST_CASE("moments")
{
  SUBCASE("single pixel")
  {
    BinaryMask m(1, 1);
    m.set(0, 0, true);
    const auto s = moments(m);
    CHECK(s.area == 1.0);
    CHECK(s.cx == 0.5);
    CHECK(s.cy == 0.5);
    CHECK(s.theta == 0.0);
  }
  SUBCASE("horizontal bar")
  {
    const auto s = moments(rectangle(9, 3, 1, 2, 1, 5));
    CHECK(s.theta == 0.0);
    CHECK(s.cx == 4.5);
    CHECK(s.cy == 1.5);
    CHECK(s.mu20 == doctest::Approx(10.0)); // sum of {-2..2}^2
  }
  SUBCASE("vertical bar")
  {
    const auto s = moments(rectangle(3, 9, 2, 1, 5, 1));
    CHECK(s.theta == doctest::Approx(M_PI / 2).epsilon(1e-12));
  }
  SUBCASE("45 degree diagonal")
  {
    BinaryMask m(20, 20);
    for (int i = 0; i < 20; ++i)
      m.set(i, i, true);
    CHECK(std::abs(moments(m).theta - M_PI / 4) < 1e-6);
  }
  SUBCASE("isotropic square is degenerate")
  {
    CHECK(moments(rectangle(10, 10, 2, 2, 4, 4)).theta == 0.0);
  }
  SUBCASE("empty mask")
  {
    CHECK_THROWS_AS(moments(BinaryMask(3, 3)), Error);
  }
  SUBCASE("property: rot180 mirrors the centroid about the raster center")
  {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
      auto m = random_blob(rng, 40);
      const auto a = moments(m), b = moments(transform(m, Transform::rot180));
      CHECK(std::abs(a.cx + b.cx - m.width) < 1e-9);
      CHECK(std::abs(a.cy + b.cy - m.height) < 1e-9);
      CHECK(a.area == b.area);
    }
  }
}

TEST_CASE("transform")
{
  std::mt19937_64 rng(7);
  const auto img = random_image(rng, 7, 5);
  auto m = random_blob(rng, 30);
  m.set(0, 3, true); // break symmetry
  CHECK(transform(transform(img, Transform::flip_h), Transform::flip_h) == img);
  CHECK(transform(transform(m, Transform::flip_v), Transform::flip_v) == m);

  auto r = img;
  for (int k = 0; k < 4; ++k)
    r = transform(r, Transform::rot90);
  CHECK(r == img);

  CHECK(transform(img, Transform::rot180) ==
        transform(transform(img, Transform::flip_h), Transform::flip_v));
  CHECK(transform(transform(img, Transform::rot90), Transform::rot270) == img);

  const auto rot = transform(img, Transform::rot90);
  CHECK(rot.width == img.height);
  CHECK(rot.height == img.width);
  // clockwise: the bottom-left pixel moves to the top-left
  CHECK(rot.at(0, 0) == img.at(img.height - 1, 0));

  for (Transform op : { Transform::flip_h, Transform::flip_v, Transform::rot90,
                        Transform::rot180, Transform::rot270 })
    CHECK(transform(m, op).area() == m.area());
}

TEST_CASE("perimeter")
{
  BinaryMask one(3, 3);
  one.set(1, 1, true);
  CHECK(perimeter(one) == 4.0);
  CHECK(perimeter(rectangle(5, 5, 1, 1, 3, 3)) == 8.0);
  CHECK(perimeter(rectangle(10, 3, 1, 1, 1, 5)) == 8.0); // there and back
  CHECK(perimeter(rectangle(5, 5, 0, 0, 2, 2)) == 4.0);

  BinaryMask diag(4, 4);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  CHECK(perimeter(diag) == doctest::Approx(2 * std::sqrt(2.0)));

  const double r = 50.0;
  const double p = perimeter(disk(128, r));
  CHECK(std::abs(p - 2 * M_PI * r) / (2 * M_PI * r) < 0.06);

  CHECK_THROWS_AS(perimeter(BinaryMask(2, 2)), Error);

  SUBCASE("property: exact under rot90 and the other transforms")
  {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 100; ++t) {
      const auto m = largest_component(random_blob(rng, 40));
      const double p0 = perimeter(m);
      for (Transform op : { Transform::flip_h, Transform::flip_v, Transform::rot90,
                            Transform::rot180, Transform::rot270 })
        CHECK(perimeter(transform(m, op)) == p0);
    }
  }
}

TEST_CASE("axis_flip_iou")
{
  SUBCASE("disk radius 40")
  {
    const auto d = disk(100, 40, 50.3, 49.6);
    CHECK(axis_flip_iou(d, Axis::major) >= 0.98);
    CHECK(axis_flip_iou(d, Axis::minor) >= 0.98);
  }
  SUBCASE("reflection-invariant rectangle")
  {
    const auto m = rectangle(20, 20, 3, 5, 6, 11);
    CHECK(axis_flip_iou(m, Axis::major) == 1.0);
    CHECK(axis_flip_iou(m, Axis::minor) == 1.0);
  }
  SUBCASE("L shape is asymmetric")
  {
    auto m = rectangle(20, 20, 2, 2, 12, 3);
    for (int i = 11; i < 14; ++i)
      for (int j = 5; j < 12; ++j)
        m.set(i, j, true);
    CHECK(axis_flip_iou(m, Axis::major) < 1.0);
    CHECK(axis_flip_iou(m, Axis::minor) < 1.0);
  }
  SUBCASE("property: bounded in [0, 1]")
  {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
      const auto m = random_blob(rng, 40);
      for (Axis a : { Axis::major, Axis::minor }) {
        const double v = axis_flip_iou(m, a);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SUBCASE("property: 1 for masks built symmetric about both center lines")
  {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 50; ++t) {
      auto m = random_blob(rng, 30);
      // symmetrize about the raster center lines, with an elongated core
      // so the principal axes stay axis aligned
      BinaryMask s(30, 30);
      for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j)
          s.set(i, j, m.at(i, j) || m.at(29 - i, j) || m.at(i, 29 - j) ||
                        m.at(29 - i, 29 - j));
      for (int j = 2; j < 28; ++j)
        s.set(14, j, true), s.set(15, j, true);
      const auto sm = moments(s);
      if (sm.mu20 == sm.mu02)
        continue;
      CHECK(axis_flip_iou(s, Axis::major) == 1.0);
      CHECK(axis_flip_iou(s, Axis::minor) == 1.0);
    }
  }
  SUBCASE("empty mask")
  {
    CHECK_THROWS_AS(axis_flip_iou(BinaryMask(3, 3), Axis::major), Error);
  }
}
