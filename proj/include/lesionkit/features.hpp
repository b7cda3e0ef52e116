#pragma once

#include "lesionkit/imaging.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lesionkit {

//! Raw per-lesion descriptor before dataset-level scaling:
//! 8x8 grayscale block means (64), per-channel 8-bin mask histograms (24),
//! then area fraction, compactness and asymmetry.
inline constexpr std::size_t kGridFeatures = 64;
inline constexpr std::size_t kHistogramFeatures = 24;
inline constexpr std::size_t kDescriptorSize = kGridFeatures + kHistogramFeatures + 3;

struct FeatureVector
{
  std::string lesion_id;
  std::vector<double> x;
};

//! Unscaled descriptor. Without a mask the histogram covers the whole image
//! and the three shape entries are 0.
std::vector<double> raw_descriptor(const RasterImage& image,
                                   const std::optional<BinaryMask>& mask);

//! Min-max scaling per descriptor block (grid, histogram, and each shape
//! scalar), with extremes taken over the whole dataset.
class FeatureScaler
{
public:
  static constexpr std::size_t kBlocks = 5;

  static FeatureScaler fit(std::span<const std::vector<double>> descriptors);
  std::vector<double> apply(std::span<const double> descriptor) const;

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);

  const std::array<double, kBlocks>& lo() const { return lo_; }
  const std::array<double, kBlocks>& hi() const { return hi_; }

private:
  static std::size_t block_of(std::size_t index);

  std::array<double, kBlocks> lo_{};
  std::array<double, kBlocks> hi_{};
};

//! Scaled descriptors for a set of images, scaler fitted in a first pass.
std::vector<std::vector<double>> build_features(
  std::span<const RasterImage> images,
  std::span<const std::optional<BinaryMask>> masks,
  FeatureScaler* fitted = nullptr);

// vectors.csv: `lesion_id,x0,...,x{d-1}`.
std::string vectors_to_csv(std::span<const FeatureVector> vectors);
std::vector<FeatureVector> vectors_from_csv(std::string_view text,
                                            std::string_view origin = "vectors");

} // namespace lesionkit
