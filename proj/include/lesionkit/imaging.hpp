#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace lesionkit {

//! Row-major 8-bit RGB raster.
struct RasterImage
{
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels; // 3 * width * height

  RasterImage() = default;
  RasterImage(int w, int h); // zero filled

  std::array<std::uint8_t, 3> at(int row, int col) const;
  void set(int row, int col, std::array<std::uint8_t, 3> rgb);

  bool operator==(const RasterImage&) const = default;
};

//! Row-major lesion mask, nonzero = lesion.
struct BinaryMask
{
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h); // all false

  bool at(int row, int col) const
  {
    return bits[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set(int row, int col, bool on)
  {
    bits[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0;
  }
  //! Out-of-raster coordinates read as background.
  bool contains(int row, int col) const
  {
    return row >= 0 && col >= 0 && row < height && col < width &&
           at(row, col);
  }
  std::size_t area() const;
  bool touches_border() const;

  bool operator==(const BinaryMask&) const = default;
};

struct ShapeMoments
{
  double area = 0.0;
  double cx = 0.0; // pixel (row i, col j) has center (j + 0.5, i + 0.5)
  double cy = 0.0;
  double mu20 = 0.0;
  double mu02 = 0.0;
  double mu11 = 0.0;
  double theta = 0.0; // major-axis orientation in (-pi/2, pi/2]
};

enum class Axis
{
  major,
  minor
};

enum class Transform
{
  flip_h, // mirror columns
  flip_v, // mirror rows
  rot90,  // clockwise
  rot180,
  rot270
};

// Decoding: PNG or JPEG, sniffed from the payload. Throws InputError.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);
//! Lesion iff round(0.299 R + 0.587 G + 0.114 B) > 127.
BinaryMask binarize(const RasterImage& image);

std::vector<std::uint8_t> encode_png(const RasterImage& image);
//! 8-bit grayscale PNG, 255 for lesion pixels.
std::vector<std::uint8_t> encode_png(const BinaryMask& mask);

//! Largest 8-connected component; ties go to the component met first in
//! scan order. Throws InputError("empty mask").
BinaryMask largest_component(const BinaryMask& mask);

ShapeMoments moments(const BinaryMask& mask);

//! IoU between the mask and its reflection across the principal axis
//! (`major`) or the perpendicular axis through the centroid (`minor`).
double axis_flip_iou(const BinaryMask& mask, Axis axis);

//! Moore-neighbourhood contour length; axial steps weigh 1, diagonal
//! steps sqrt(2). An isolated pixel has perimeter 4.
double perimeter(const BinaryMask& mask);

RasterImage transform(const RasterImage& image, Transform op);
BinaryMask transform(const BinaryMask& mask, Transform op);

} // namespace lesionkit
