#include "lesionkit/autoann.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"
#include "lesionkit/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lesionkit {

ReferencePalette
ReferencePalette::standard()
{
  ReferencePalette p;
  p.anchors = { { "white", { 255, 255, 255 } },
                { "red", { 204, 51, 51 } },
                { "light_brown", { 180, 120, 80 } },
                { "dark_brown", { 100, 60, 30 } },
                { "blue_gray", { 100, 120, 150 } },
                { "black", { 30, 30, 30 } } };
  p.tau = 0.05;
  return p;
}

void
ReferencePalette::validate() const
{
  if (anchors.size() != 6)
    throw InputError("palette must define exactly six anchors, got " +
                     std::to_string(anchors.size()));
  if (!(tau > 0.0 && tau < 1.0))
    throw InputError("palette tau must lie in (0, 1)");
}

ReferencePalette
ReferencePalette::from_json(const std::string& text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("palette: ") + e.what());
  }
  ReferencePalette p;
  if (!j.is_object() || !j.contains("anchors") || !j["anchors"].is_object())
    throw InputError("palette: missing \"anchors\" object");
  for (const auto& [name, value] : j["anchors"].items()) {
    if (!value.is_array() || value.size() != 3)
      throw InputError("palette: anchor " + name + " must be [r,g,b]");
    PaletteAnchor anchor{ name, {} };
    for (std::size_t k = 0; k < 3; ++k) {
      if (!value[k].is_number_integer() || value[k].get<int>() < 0 ||
          value[k].get<int>() > 255)
        throw InputError("palette: anchor " + name +
                         " channels must be integers in [0, 255]");
      anchor.rgb[k] = static_cast<std::uint8_t>(value[k].get<int>());
    }
    p.anchors.push_back(anchor);
  }
  if (j.contains("tau")) {
    if (!j["tau"].is_number())
      throw InputError("palette: tau must be a number");
    p.tau = j["tau"].get<double>();
  }
  p.validate();
  return p;
}

ReferencePalette
ReferencePalette::load(const std::filesystem::path& path)
{
  return from_json(csv::read_text(path));
}

std::array<double, 3>
srgb_to_lab(std::array<std::uint8_t, 3> rgb)
{
  auto linear = [](std::uint8_t v) {
    const double c = v / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = linear(rgb[0]);
  const double g = linear(rgb[1]);
  const double b = linear(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return { 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz) };
}

double
score_asymmetry(const BinaryMask& mask)
{
  const BinaryMask blob = largest_component(mask);
  const double major = axis_flip_iou(blob, Axis::major);
  const double minor = axis_flip_iou(blob, Axis::minor);
  return std::clamp(1.0 - 0.5 * (major + minor), 0.0, 1.0);
}

double
score_border(const BinaryMask& mask)
{
  const BinaryMask blob = largest_component(mask);
  const double p = perimeter(blob);
  const double a = static_cast<double>(blob.area());
  return std::max(1.0, p * p / (4.0 * std::numbers::pi * a));
}

int
score_color(const RasterImage& image,
            const BinaryMask& mask,
            const ReferencePalette& palette)
{
  palette.validate();
  if (image.width != mask.width || image.height != mask.height)
    throw InputError("image and mask dimensions differ");

  std::vector<std::array<double, 3>> anchors;
  for (const auto& a : palette.anchors)
    anchors.push_back(srgb_to_lab(a.rgb));

  std::vector<std::size_t> counts(anchors.size(), 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i])
      continue;
    const auto lab = srgb_to_lab({ image.pixels[3 * i], image.pixels[3 * i + 1],
                                   image.pixels[3 * i + 2] });
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double dl = lab[0] - anchors[k][0];
      const double da = lab[1] - anchors[k][1];
      const double db = lab[2] - anchors[k][2];
      const double d = dl * dl + da * da + db * db;
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    ++counts[best];
    ++total;
  }
  if (total == 0)
    throw InputError("empty mask");

  int present = 0;
  for (std::size_t c : counts)
    if (static_cast<double>(c) >= palette.tau * static_cast<double>(total))
      ++present;
  return present;
}

AutoScores
score_lesion(const RasterImage& image,
             const BinaryMask& mask,
             const ReferencePalette& palette)
{
  if (image.width != mask.width || image.height != mask.height)
    throw InputError("image and mask dimensions differ");
  const BinaryMask blob = largest_component(mask);
  AutoScores s;
  s.asymmetry = score_asymmetry(blob);
  s.border = score_border(blob);
  s.color = score_color(image, blob, palette);
  s.border_touches_edge = blob.touches_border();
  return s;
}

BatchResult
annotate_batch(const DatasetManifest& manifest,
               const ReferencePalette& palette,
               unsigned threads)
{
  palette.validate();

  struct Outcome
  {
    std::optional<AutoScores> scores;
    std::optional<Diagnostic> warning;
    std::optional<Diagnostic> error;
  };

  const auto& records = manifest.records;
  std::vector<Outcome> outcomes =
    parallel_map<Outcome>(records.size(), threads, [&](std::size_t i) {
      const auto& rec = records[i];
      Outcome out;
      if (!rec.mask_path) {
        out.warning = Diagnostic{ rec.lesion_id, "no mask; lesion skipped" };
        return out;
      }
      try {
        const auto image = decode_image(csv::read_bytes(rec.image_path));
        const auto mask = decode_mask(csv::read_bytes(*rec.mask_path));
        out.scores = score_lesion(image, mask, palette);
        if (out.scores->border_touches_edge)
          out.warning = Diagnostic{ rec.lesion_id, "mask touches raster border" };
      } catch (const Error& e) {
        out.error = Diagnostic{ rec.lesion_id, e.what() };
      }
      return out;
    });

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].lesion_id < records[b].lesion_id;
  });

  BatchResult result;
  for (std::size_t i : order) {
    const auto& rec = records[i];
    const auto& out = outcomes[i];
    if (out.warning)
      result.warnings.push_back(*out.warning);
    if (out.error)
      result.errors.push_back(*out.error);
    if (!out.scores)
      continue;
    const double values[3] = { out.scores->asymmetry, out.scores->border,
                               static_cast<double>(out.scores->color) };
    for (Feature f : kAllFeatures)
      result.table.rows.push_back({ rec.lesion_id, Source::auto_, f,
                                    kAutoAnnotatorId,
                                    values[static_cast<int>(f)] });
  }
  return result;
}

} // namespace lesionkit
