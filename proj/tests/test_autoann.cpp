#include "support.hpp"

#include "lesionkit/autoann.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lesionkit;
using namespace lesionkit::test;
namespace fs = std::filesystem;

namespace {

RasterImage
filled(int w, int h, std::array<std::uint8_t, 3> rgb)
{
  RasterImage img(w, h);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      img.set(i, j, rgb);
  return img;
}

//! Half disk of radius r, flat side on the vertical line x = c.
BinaryMask
half_disk(int size, double r, double c)
{
  BinaryMask m = disk(size, r, c, c);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      if (j + 0.5 < c)
        m.set(i, j, false);
  return m;
}

//! Reflection IoU across the vertical line through the centroid: reflect
//! pixel centers, round to the nearest pixel, intersect with the original.
double
pushed_vertical_iou(const BinaryMask& m)
{
  double sx = 0.0, n = 0.0;
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < m.width; ++j)
      if (m.at(i, j))
        sx += j + 0.5, n += 1.0;
  const double cx = sx / n;
  BinaryMask reflected(m.width * 2, m.height);
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < m.width; ++j)
      if (m.at(i, j)) {
        const int col = static_cast<int>(std::floor(2 * cx - (j + 0.5)));
        if (col >= 0 && col < reflected.width)
          reflected.set(i, col, true);
      }
  double inter = 0.0, uni = 0.0;
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < reflected.width; ++j) {
      const bool a = m.contains(i, j), b = reflected.at(i, j);
      inter += a && b;
      uni += a || b;
    }
  return inter / uni;
}

//! Continuous half disk against its reflection about the centroid line,
//! sampled on a fine grid.
double
continuous_half_disk_iou(double r)
{
  const double d = 4.0 * r / (3.0 * M_PI);
  const double step = r / 2000.0;
  double inter = 0.0, uni = 0.0;
  for (double y = -r; y <= r; y += step)
    for (double x = -r; x <= 2 * r; x += step) {
      const bool inside = x >= 0 && x * x + y * y <= r * r;
      const double xr = 2 * d - x;
      const bool mirrored = xr >= 0 && xr * xr + y * y <= r * r;
      inter += inside && mirrored;
      uni += inside || mirrored;
    }
  return inter / uni;
}

} // namespace

TEST_CASE("score_asymmetry")
{
  CHECK(score_asymmetry(disk(100, 40)) <= 0.02);
  CHECK(score_asymmetry(disk(100, 40, 47.3, 52.8)) <= 0.02);
  CHECK(score_asymmetry(rectangle(30, 30, 4, 6, 10, 17)) == 0.0);
  CHECK_THROWS_AS(score_asymmetry(BinaryMask(5, 5)), Error);

  SUBCASE("half disk against brute-force reflections")
  {
    const auto m = half_disk(100, 40.0, 50.0);
    const double score = score_asymmetry(m);
    // minor-axis reflection (horizontal line) is exact by construction
    const double expected = 1.0 - (1.0 + pushed_vertical_iou(m)) / 2.0;
    CHECK(std::abs(score - expected) < 0.01);
    const double continuous = 1.0 - (1.0 + continuous_half_disk_iou(40.0)) / 2.0;
    CHECK(std::abs(score - continuous) < 0.01);
    CHECK(score > 0.1);
  }
  SUBCASE("largest component only")
  {
    auto m = disk(100, 30);
    m.set(2, 2, true);
    CHECK(score_asymmetry(m) == score_asymmetry(disk(100, 30)));
  }
}

TEST_CASE("score_border")
{
  const double disk_c = score_border(disk(128, 50));
  CHECK(disk_c >= 1.0);
  CHECK(disk_c <= 1.15);

  const double square = score_border(rectangle(110, 110, 5, 5, 100, 100));
  CHECK(std::abs(square - 4.0 / M_PI) / (4.0 / M_PI) < 0.05);

  const double bar = score_border(rectangle(210, 6, 2, 3, 2, 200));
  CHECK(bar > 10.0);
  const double analytic = std::pow(2.0 * 202.0, 2) / (4.0 * M_PI * 400.0);
  CHECK(std::abs(bar - analytic) / analytic < 0.10);

  BinaryMask one(3, 3);
  one.set(1, 1, true);
  CHECK(score_border(one) == doctest::Approx(4.0 / M_PI)); // P = 4, A = 1

  SUBCASE("teeth on a disk raise the score")
  {
    const auto base = disk(100, 30);
    auto teeth = base;
    for (int k = 0; k < 16; ++k) {
      const double a = 2 * M_PI * k / 16;
      const int ci = static_cast<int>(50 + 32 * std::sin(a));
      const int cj = static_cast<int>(50 + 32 * std::cos(a));
      for (int i = ci - 2; i <= ci + 2; ++i)
        for (int j = cj - 2; j <= cj + 2; ++j)
          teeth.set(i, j, true);
    }
    CHECK(score_border(teeth) > score_border(base));
  }
  SUBCASE("property: never below 1")
  {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 100; ++t)
      CHECK(score_border(random_blob(rng)) >= 1.0);
  }
}

TEST_CASE("score_color")
{
  const auto palette = ReferencePalette::standard();
  const std::array<std::uint8_t, 3> dark_brown = { 100, 60, 30 }, black = { 30, 30, 30 },
                                    white = { 255, 255, 255 };
  const BinaryMask all = rectangle(10, 10, 0, 0, 10, 10);

  CHECK(score_color(filled(10, 10, dark_brown), all, palette) == 1);

  auto half = filled(10, 10, black);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 10; ++j)
      half.set(i, j, white);
  CHECK(score_color(half, all, palette) == 2);

  auto mostly = filled(10, 10, dark_brown);
  for (int j = 0; j < 4; ++j)
    mostly.set(0, j, black);
  CHECK(score_color(mostly, all, palette) == 1);
  mostly.set(0, 4, black); // 5% reaches the threshold
  CHECK(score_color(mostly, all, palette) == 2);

  CHECK_THROWS_AS(score_color(filled(10, 9, black), all, palette), Error);
  CHECK_THROWS_AS(score_color(filled(10, 10, black), BinaryMask(10, 10), palette),
                  Error);

  SUBCASE("every anchor maps to itself")
  {
    for (const auto& a : palette.anchors)
      CHECK(score_color(filled(4, 4, a.rgb), rectangle(4, 4, 0, 0, 4, 4), palette) == 1);
    RasterImage six(6, 1);
    for (int j = 0; j < 6; ++j)
      six.set(0, j, palette.anchors[static_cast<std::size_t>(j)].rgb);
    CHECK(score_color(six, rectangle(6, 1, 0, 0, 1, 6), palette) == 6);
  }
  SUBCASE("property: pixels outside the mask are irrelevant")
  {
    std::mt19937_64 rng(43);
    for (int t = 0; t < 50; ++t) {
      const auto m = random_blob(rng, 32);
      auto img = random_image(rng, 32, 32);
      const int c0 = score_color(img, m, palette);
      auto other = random_image(rng, 32, 32);
      for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
          if (m.at(i, j))
            other.set(i, j, img.at(i, j));
      CHECK(score_color(other, m, palette) == c0);
    }
  }
}

TEST_CASE("sRGB to CIELAB reference values")
{
  const auto white = srgb_to_lab({ 255, 255, 255 });
  CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(std::abs(white[1]) < 1e-3);
  CHECK(std::abs(white[2]) < 1e-3);
  const auto red = srgb_to_lab({ 255, 0, 0 });
  CHECK(red[0] == doctest::Approx(53.24).epsilon(1e-3));
  CHECK(red[1] == doctest::Approx(80.09).epsilon(1e-3));
  CHECK(red[2] == doctest::Approx(67.20).epsilon(1e-3));
  const auto black = srgb_to_lab({ 0, 0, 0 });
  CHECK(black[0] == 0.0);
}

TEST_CASE("property: scores are invariant under flips and rotations")
{
  const auto palette = ReferencePalette::standard();
  std::mt19937_64 rng(47);
  for (int t = 0; t < 60; ++t) {
    const auto m = random_blob(rng, 40);
    const auto img = random_image(rng, 40, 40);
    const auto s = score_lesion(img, m, palette);
    for (Transform op : { Transform::flip_h, Transform::flip_v, Transform::rot90,
                          Transform::rot180, Transform::rot270 }) {
      const auto r = score_lesion(transform(img, op), transform(m, op), palette);
      CHECK(r.border == s.border);
      CHECK(r.color == s.color);
      if (op == Transform::rot90 || op == Transform::rot270)
        CHECK(std::abs(r.asymmetry - s.asymmetry) <= 1e-6);
      else
        CHECK(r.asymmetry == s.asymmetry);
    }
  }
}

TEST_CASE("palette files")
{
  const auto p = ReferencePalette::from_json(
    R"({"anchors": {"white": [255,255,255], "red": [204,51,51], "lb": [180,120,80],
        "db": [100,60,30], "bg": [100,120,150], "black": [30,30,30]}, "tau": 0.1})");
  CHECK(p.tau == 0.1);
  REQUIRE(p.anchors.size() == 6);
  CHECK(p.anchors[0].name == "bg"); // sorted key order
  CHECK_THROWS_AS(ReferencePalette::from_json(R"({"anchors": {"white": [255,255,255]}})"),
                  InputError);
  CHECK_THROWS_AS(ReferencePalette::from_json(
                    R"({"anchors": {"a":[1,1,1],"b":[2,2,2],"c":[3,3,3],"d":[4,4,4],
                        "e":[5,5,5],"f":[6,6,6]}, "tau": 1.5})"),
                  InputError);
  CHECK_THROWS_AS(ReferencePalette::from_json("not json"), InputError);
  CHECK_THROWS_AS(ReferencePalette::load("/nonexistent/palette.json"), InputError);
  CHECK_NOTHROW(ReferencePalette::standard().validate());
}

TEST_CASE("annotate_batch")
{
  const auto dir = scratch_dir("annotate");
  auto write = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
    csv::write_text(dir / name, std::string(bytes.begin(), bytes.end()));
    return dir / name;
  };
  std::mt19937_64 rng(53);
  const auto img = write("a.png", encode_png(random_image(rng, 40, 40)));
  const auto ma = write("a_mask.png", encode_png(disk(40, 12)));
  const auto mb = write("b_mask.png", encode_png(rectangle(40, 40, 5, 5, 20, 10)));
  const auto edge = write("e_mask.png", encode_png(rectangle(40, 40, 0, 0, 10, 10)));
  const auto bad = write("bad.png", { 1, 2, 3 });

  DatasetManifest m;
  m.records = { { "b", img, mb, 1 }, { "a", img, ma, 0 } };
  const auto palette = ReferencePalette::standard();

  SUBCASE("two valid lesions, sorted output")
  {
    const auto r = annotate_batch(m, palette);
    REQUIRE(r.table.size() == 6);
    CHECK(r.table.rows[0].lesion_id == "a");
    CHECK(r.table.rows[0].feature == Feature::A);
    CHECK(r.table.rows[5].lesion_id == "b");
    CHECK(r.table.rows[5].feature == Feature::C);
    for (const auto& row : r.table.rows) {
      CHECK(row.source == Source::auto_);
      CHECK(row.annotator_id == kAutoAnnotatorId);
    }
    CHECK(r.warnings.empty());
    CHECK(r.errors.empty());
    CHECK(annotations_to_csv(annotate_batch(m, palette, 2).table) ==
          annotations_to_csv(r.table));
  }
  SUBCASE("missing mask is skipped with a warning")
  {
    m.records[0].mask_path.reset();
    const auto r = annotate_batch(m, palette);
    CHECK(r.table.size() == 3);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].lesion_id == "b");
  }
  SUBCASE("edge-touching masks are flagged, failures collected")
  {
    m.records.push_back({ "e", img, edge, 0 });
    m.records.push_back({ "x", bad, ma, 0 });
    const auto r = annotate_batch(m, palette);
    CHECK(r.table.size() == 9);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].lesion_id == "e");
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].lesion_id == "x");
  }
}
