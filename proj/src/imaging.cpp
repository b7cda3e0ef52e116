#include "lesionkit/imaging.hpp"
#include "lesionkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lesionkit {

RasterImage::RasterImage(int w, int h)
  : width(w)
  , height(h)
  , pixels(static_cast<std::size_t>(w) * h * 3, 0)
{
  if (w <= 0 || h <= 0)
    throw InputError("raster dimensions must be positive");
}

std::array<std::uint8_t, 3>
RasterImage::at(int row, int col) const
{
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  return { pixels[i], pixels[i + 1], pixels[i + 2] };
}

void
RasterImage::set(int row, int col, std::array<std::uint8_t, 3> rgb)
{
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  pixels[i] = rgb[0];
  pixels[i + 1] = rgb[1];
  pixels[i + 2] = rgb[2];
}

BinaryMask::BinaryMask(int w, int h)
  : width(w)
  , height(h)
  , bits(static_cast<std::size_t>(w) * h, 0)
{
  if (w <= 0 || h <= 0)
    throw InputError("raster dimensions must be positive");
}

std::size_t
BinaryMask::area() const
{
  return static_cast<std::size_t>(
    std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

bool
BinaryMask::touches_border() const
{
  for (int c = 0; c < width; ++c)
    if (at(0, c) || at(height - 1, c))
      return true;
  for (int r = 0; r < height; ++r)
    if (at(r, 0) || at(r, width - 1))
      return true;
  return false;
}

BinaryMask
binarize(const RasterImage& image)
{
  BinaryMask mask(image.width, image.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    const double luma = 0.299 * image.pixels[3 * i] +
                        0.587 * image.pixels[3 * i + 1] +
                        0.114 * image.pixels[3 * i + 2];
    mask.bits[i] = std::lround(luma) > 127 ? 1 : 0;
  }
  return mask;
}

namespace {

// 8-neighbourhood in clockwise order (rows grow downwards), starting west.
constexpr int kDr[8] = { 0, -1, -1, -1, 0, 1, 1, 1 };
constexpr int kDc[8] = { -1, -1, 0, 1, 1, 1, 0, -1 };

int
direction_of(int dr, int dc)
{
  for (int k = 0; k < 8; ++k)
    if (kDr[k] == dr && kDc[k] == dc)
      return k;
  return -1;
}

void
require_nonempty(const BinaryMask& mask)
{
  if (mask.width <= 0 || mask.height <= 0 ||
      std::none_of(mask.bits.begin(), mask.bits.end(),
                   [](auto b) { return b != 0; }))
    throw InputError("empty mask");
}

// Exact integer moment sums over doubled pixel-center coordinates
// (2j + 1, 2i + 1), so grid symmetries permute them without rounding.
struct MomentSums
{
  __int128 n = 0;
  __int128 sx = 0, sy = 0;
  __int128 sxx = 0, syy = 0, sxy = 0;

  // n^2 * 4 * mu_pq, exact
  __int128 c20() const { return n * sxx - sx * sx; }
  __int128 c02() const { return n * syy - sy * sy; }
  __int128 c11() const { return n * sxy - sx * sy; }
};

MomentSums
moment_sums(const BinaryMask& mask)
{
  MomentSums m;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c))
        continue;
      const __int128 x = 2 * c + 1;
      const __int128 y = 2 * r + 1;
      m.n += 1;
      m.sx += x;
      m.sy += y;
      m.sxx += x * x;
      m.syy += y * y;
      m.sxy += x * y;
    }
  }
  return m;
}

struct Bounds
{
  int r0 = std::numeric_limits<int>::max();
  int c0 = std::numeric_limits<int>::max();
  int r1 = std::numeric_limits<int>::min();
  int c1 = std::numeric_limits<int>::min();

  void include(int r, int c)
  {
    r0 = std::min(r0, r);
    c0 = std::min(c0, c);
    r1 = std::max(r1, r);
    c1 = std::max(c1, c);
  }
};

// Nearest pixel indices to a continuous index coordinate. Exact half-way
// points (within tolerance) yield both neighbours so that the rule commutes
// with mirroring the grid.
int
nearest_indices(double f, int out[2])
{
  constexpr double kTieTolerance = 1e-9;
  const double fl = std::floor(f);
  const double frac = f - fl;
  if (std::abs(frac - 0.5) < kTieTolerance) {
    out[0] = static_cast<int>(fl);
    out[1] = static_cast<int>(fl) + 1;
    return 2;
  }
  out[0] = static_cast<int>(frac < 0.5 ? fl : fl + 1);
  return 1;
}

} // namespace

BinaryMask
largest_component(const BinaryMask& mask)
{
  require_nonempty(mask);
  const int w = mask.width;
  const int h = mask.height;
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<std::size_t> stack;
  int best_label = -1;
  std::size_t best_size = 0;
  int next_label = 0;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t start = static_cast<std::size_t>(r) * w + c;
      if (!mask.bits[start] || label[start] >= 0)
        continue;
      const int id = next_label++;
      std::size_t size = 0;
      label[start] = id;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        ++size;
        const int pr = static_cast<int>(p / w);
        const int pc = static_cast<int>(p % w);
        for (int k = 0; k < 8; ++k) {
          const int nr = pr + kDr[k];
          const int nc = pc + kDc[k];
          if (!mask.contains(nr, nc))
            continue;
          const std::size_t q = static_cast<std::size_t>(nr) * w + nc;
          if (label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = id;
      }
    }
  }

  BinaryMask out(w, h);
  for (std::size_t i = 0; i < label.size(); ++i)
    out.bits[i] = label[i] == best_label ? 1 : 0;
  return out;
}

ShapeMoments
moments(const BinaryMask& mask)
{
  require_nonempty(mask);
  const MomentSums s = moment_sums(mask);
  const double n = static_cast<double>(s.n);

  ShapeMoments m;
  m.area = n;
  m.cx = static_cast<double>(s.sx) / (2.0 * n);
  m.cy = static_cast<double>(s.sy) / (2.0 * n);
  // c_pq = 4 n^2 mu_pq / n  ->  mu_pq = c_pq / (4 n)
  m.mu20 = static_cast<double>(s.c20()) / (4.0 * n);
  m.mu02 = static_cast<double>(s.c02()) / (4.0 * n);
  m.mu11 = static_cast<double>(s.c11()) / (4.0 * n);
  if (s.c11() == 0 && s.c20() == s.c02())
    m.theta = 0.0;
  else
    m.theta = 0.5 * std::atan2(2.0 * static_cast<double>(s.c11()),
                               static_cast<double>(s.c20() - s.c02()));
  return m;
}

double
axis_flip_iou(const BinaryMask& mask, Axis axis)
{
  require_nonempty(mask);
  const MomentSums s = moment_sums(mask);
  const double n = static_cast<double>(s.n);
  const double cx = static_cast<double>(s.sx) / (2.0 * n);
  const double cy = static_cast<double>(s.sy) / (2.0 * n);

  // Reflection across the major axis is [[cos2t, sin2t], [sin2t, -cos2t]];
  // the minor-axis reflection is its negation.
  double cos2 = 1.0;
  double sin2 = 0.0;
  const __int128 a = s.c20() - s.c02();
  const __int128 b = 2 * s.c11();
  if (a != 0 || b != 0) {
    const long double la = static_cast<long double>(a);
    const long double lb = static_cast<long double>(b);
    const long double rho = std::hypot(la, lb);
    cos2 = static_cast<double>(la / rho);
    sin2 = static_cast<double>(lb / rho);
  }
  if (axis == Axis::minor) {
    cos2 = -cos2;
    sin2 = -sin2;
  }
  auto reflect = [&](double x, double y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::pair{ cx + cos2 * dx + sin2 * dy, cy + sin2 * dx - cos2 * dy };
  };

  Bounds box;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c))
        box.include(r, c);

  // Region covering the mask and its reflection.
  Bounds region = box;
  for (int corner = 0; corner < 4; ++corner) {
    const double x = (corner & 1) ? box.c1 + 1.0 : box.c0 + 0.0;
    const double y = (corner & 2) ? box.r1 + 1.0 : box.r0 + 0.0;
    auto [rx, ry] = reflect(x, y);
    region.include(static_cast<int>(std::floor(ry)) - 1,
                   static_cast<int>(std::floor(rx)) - 1);
    region.include(static_cast<int>(std::ceil(ry)) + 1,
                   static_cast<int>(std::ceil(rx)) + 1);
  }

  std::size_t inter = 0;
  std::size_t uni = 0;
  for (int r = region.r0; r <= region.r1; ++r) {
    for (int c = region.c0; c <= region.c1; ++c) {
      auto [rx, ry] = reflect(c + 0.5, r + 0.5);
      int cols[2];
      int rows[2];
      const int nc = nearest_indices(rx - 0.5, cols);
      const int nr = nearest_indices(ry - 0.5, rows);
      bool reflected = false;
      for (int i = 0; i < nr && !reflected; ++i)
        for (int j = 0; j < nc && !reflected; ++j)
          reflected = mask.contains(rows[i], cols[j]);
      const bool original = mask.contains(r, c);
      inter += (original && reflected) ? 1 : 0;
      uni += (original || reflected) ? 1 : 0;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double
perimeter(const BinaryMask& mask)
{
  require_nonempty(mask);
  int sr = -1;
  int sc = -1;
  for (int r = 0; r < mask.height && sr < 0; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) {
        sr = r;
        sc = c;
        break;
      }

  // Start pixel is the first in scan order, so its west neighbour is
  // background and serves as the initial backtrack.
  auto next_move = [&](int r, int c, int back_dir, int& to_dir) {
    for (int i = 1; i <= 8; ++i) {
      const int k = (back_dir + i) % 8;
      if (mask.contains(r + kDr[k], c + kDc[k])) {
        to_dir = k;
        return true;
      }
    }
    return false;
  };

  int first_dir = -1;
  if (!next_move(sr, sc, 0, first_dir))
    return 4.0;

  std::size_t axial = 0;
  std::size_t diagonal = 0;
  int r = sr;
  int c = sc;
  int dir = first_dir;
  const std::size_t limit = 8 * mask.bits.size() + 16;
  for (std::size_t step = 0; step < limit; ++step) {
    // The neighbour checked just before `dir` is background and becomes
    // the backtrack seen from the new pixel.
    const int prev = (dir + 7) % 8;
    const int br = r + kDr[prev];
    const int bc = c + kDc[prev];
    r += kDr[dir];
    c += kDc[dir];
    ((dir & 1) ? diagonal : axial) += 1;
    const int back_dir = direction_of(br - r, bc - c);
    int to_dir = -1;
    next_move(r, c, back_dir, to_dir);
    if (r == sr && c == sc && to_dir == first_dir)
      return static_cast<double>(axial) +
             std::sqrt(2.0) * static_cast<double>(diagonal);
    dir = to_dir;
  }
  throw Error("perimeter: contour tracing did not close");
}

namespace {

template<typename Raster, typename Copy>
Raster
apply_transform(const Raster& in, Transform op, Copy copy)
{
  const int w = in.width;
  const int h = in.height;
  const bool swap = op == Transform::rot90 || op == Transform::rot270;
  Raster out(swap ? h : w, swap ? w : h);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      int sr = r;
      int sc = c;
      switch (op) {
        case Transform::flip_h:
          sc = w - 1 - c;
          break;
        case Transform::flip_v:
          sr = h - 1 - r;
          break;
        case Transform::rot90:
          sr = h - 1 - c;
          sc = r;
          break;
        case Transform::rot180:
          sr = h - 1 - r;
          sc = w - 1 - c;
          break;
        case Transform::rot270:
          sr = c;
          sc = w - 1 - r;
          break;
      }
      copy(in, sr, sc, out, r, c);
    }
  }
  return out;
}

} // namespace

RasterImage
transform(const RasterImage& image, Transform op)
{
  return apply_transform(image, op,
                         [](const RasterImage& in, int sr, int sc,
                            RasterImage& out, int r, int c) {
                           out.set(r, c, in.at(sr, sc));
                         });
}

BinaryMask
transform(const BinaryMask& mask, Transform op)
{
  return apply_transform(mask, op,
                         [](const BinaryMask& in, int sr, int sc,
                            BinaryMask& out, int r, int c) {
                           out.set(r, c, in.at(sr, sc));
                         });
}

} // namespace lesionkit
