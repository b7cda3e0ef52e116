#include "lesionkit/features.hpp"
#include "lesionkit/autoann.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lesionkit {

std::vector<double>
raw_descriptor(const RasterImage& image, const std::optional<BinaryMask>& mask)
{
  if (mask && (mask->width != image.width || mask->height != image.height))
    throw InputError("image and mask dimensions differ");
  const int w = image.width;
  const int h = image.height;
  std::vector<double> out;
  out.reserve(kDescriptorSize);

  auto luma = [&](int r, int c) {
    const auto px = image.at(r, c);
    return (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
  };
  for (int bi = 0; bi < 8; ++bi) {
    const int r0 = bi * h / 8;
    const int r1 = std::max(r0 + 1, (bi + 1) * h / 8);
    for (int bj = 0; bj < 8; ++bj) {
      const int c0 = bj * w / 8;
      const int c1 = std::max(c0 + 1, (bj + 1) * w / 8);
      double sum = 0.0;
      for (int r = r0; r < std::min(r1, h); ++r)
        for (int c = c0; c < std::min(c1, w); ++c)
          sum += luma(r, c);
      const int count = (std::min(r1, h) - r0) * (std::min(c1, w) - c0);
      out.push_back(sum / count);
    }
  }

  std::array<double, kHistogramFeatures> hist{};
  std::size_t covered = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask && !mask->at(r, c))
        continue;
      const auto px = image.at(r, c);
      for (int ch = 0; ch < 3; ++ch)
        hist[static_cast<std::size_t>(ch * 8 + px[ch] / 32)] += 1.0;
      ++covered;
    }
  }
  for (double v : hist)
    out.push_back(covered ? v / static_cast<double>(covered) : 0.0);

  if (mask && covered > 0) {
    const BinaryMask blob = largest_component(*mask);
    out.push_back(static_cast<double>(mask->area()) /
                  (static_cast<double>(w) * h));
    out.push_back(score_border(blob));
    out.push_back(score_asymmetry(blob));
  } else {
    out.insert(out.end(), { 0.0, 0.0, 0.0 });
  }
  return out;
}

std::size_t
FeatureScaler::block_of(std::size_t index)
{
  if (index < kGridFeatures)
    return 0;
  if (index < kGridFeatures + kHistogramFeatures)
    return 1;
  return 2 + (index - kGridFeatures - kHistogramFeatures);
}

FeatureScaler
FeatureScaler::fit(std::span<const std::vector<double>> descriptors)
{
  FeatureScaler s;
  s.lo_.fill(std::numeric_limits<double>::infinity());
  s.hi_.fill(-std::numeric_limits<double>::infinity());
  for (const auto& d : descriptors) {
    if (d.size() != kDescriptorSize)
      throw InputError("descriptor has the wrong dimension");
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::size_t b = block_of(i);
      s.lo_[b] = std::min(s.lo_[b], d[i]);
      s.hi_[b] = std::max(s.hi_[b], d[i]);
    }
  }
  if (descriptors.empty()) {
    s.lo_.fill(0.0);
    s.hi_.fill(0.0);
  }
  return s;
}

std::vector<double>
FeatureScaler::apply(std::span<const double> descriptor) const
{
  if (descriptor.size() != kDescriptorSize)
    throw InputError("descriptor has the wrong dimension");
  std::vector<double> out(descriptor.size());
  for (std::size_t i = 0; i < descriptor.size(); ++i) {
    const std::size_t b = block_of(i);
    const double span = hi_[b] - lo_[b];
    out[i] = span > 0.0 ? std::clamp((descriptor[i] - lo_[b]) / span, 0.0, 1.0)
                        : 0.0;
  }
  return out;
}

nlohmann::json
FeatureScaler::to_json() const
{
  return { { "lo", lo_ }, { "hi", hi_ } };
}

FeatureScaler
FeatureScaler::from_json(const nlohmann::json& j)
{
  FeatureScaler s;
  try {
    j.at("lo").get_to(s.lo_);
    j.at("hi").get_to(s.hi_);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("feature scaler: ") + e.what());
  }
  return s;
}

std::vector<std::vector<double>>
build_features(std::span<const RasterImage> images,
               std::span<const std::optional<BinaryMask>> masks,
               FeatureScaler* fitted)
{
  if (images.size() != masks.size())
    throw InputError("one mask slot per image required");
  std::vector<std::vector<double>> raw;
  raw.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    raw.push_back(raw_descriptor(images[i], masks[i]));
  const FeatureScaler scaler = FeatureScaler::fit(raw);
  if (fitted)
    *fitted = scaler;
  std::vector<std::vector<double>> out;
  out.reserve(raw.size());
  for (const auto& d : raw)
    out.push_back(scaler.apply(d));
  return out;
}

std::string
vectors_to_csv(std::span<const FeatureVector> vectors)
{
  const std::size_t d = vectors.empty() ? 0 : vectors.front().x.size();
  std::string out = "lesion_id";
  for (std::size_t j = 0; j < d; ++j)
    out += ",x" + std::to_string(j);
  out += "\n";
  for (const auto& v : vectors) {
    if (v.x.size() != d)
      throw InputError("inconsistent feature vector dimension");
    out += csv::escape(v.lesion_id);
    for (double x : v.x)
      out += "," + csv::format_double(x);
    out += "\n";
  }
  return out;
}

std::vector<FeatureVector>
vectors_from_csv(std::string_view text, std::string_view origin)
{
  const std::string where(origin);
  auto doc = csv::parse(text);
  if (doc.header.size() < 2 || doc.header[0] != "lesion_id")
    throw InputError(where + ": expected header `lesion_id,x0,...`");
  for (std::size_t j = 1; j < doc.header.size(); ++j)
    if (doc.header[j] != "x" + std::to_string(j - 1))
      throw InputError(where + ": unexpected column " + doc.header[j]);
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& row = doc.rows[i];
    const std::string at = where + ": line " + std::to_string(doc.line_numbers[i]);
    if (row.size() != doc.header.size())
      throw InputError(at + ": column count mismatch");
    FeatureVector v{ row[0], {} };
    for (std::size_t j = 1; j < row.size(); ++j) {
      const double x = csv::parse_double(row[j], at);
      if (!std::isfinite(x))
        throw InputError(at + ": non-finite feature value");
      v.x.push_back(x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

} // namespace lesionkit
