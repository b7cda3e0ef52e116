#include "lesionkit/synthetic.hpp"
#include "lesionkit/autoann.hpp"
#include "lesionkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace lesionkit {

void
SyntheticParams::validate() const
{
  if (n < 50)
    throw InputError("synthetic n must be at least 50");
  if (d < 2)
    throw InputError("synthetic d must be at least 2");
  if (latent_dim < 3)
    throw InputError("synthetic latent_dim must be at least 3");
  if (!(noise_cls >= 0.0) || !(noise_ann >= 0.0) || !(feature_noise >= 0.0))
    throw InputError("synthetic noise levels must be non-negative");
  if (!(label_loading >= 0.0 && label_loading <= 1.0))
    throw InputError("label_loading must lie in [0, 1]");
  for (double c : { student_coverage, student_color_coverage, crowd_coverage })
    if (!(c >= 0.0 && c <= 1.0))
      throw InputError("coverage fractions must lie in [0, 1]");
  if (students_per_lesion == 0 || crowd_per_lesion == 0)
    throw InputError("annotators per lesion must be positive");
}

std::vector<FeatureVector>
SyntheticDataset::feature_vectors() const
{
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < lesion_ids.size(); ++i) {
    FeatureVector v{ lesion_ids[i], {} };
    const auto row = features.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < row.size(); ++j)
      v.x.push_back(row[j]);
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

struct Scale
{
  double center;
  double spread;
};

// Raw-scale layout of the synthetic raters per feature.
constexpr Scale kStudentScale[3] = { { 2.5, 0.8 }, { 50.0, 15.0 }, { 7.5, 2.4 } };
constexpr Scale kCrowdScale[3] = { { 5.0, 1.5 }, { 5.0, 1.5 }, { 5.0, 1.5 } };
constexpr Scale kAutoScale[3] = { { 0.2, 0.05 }, { 1.4, 0.15 }, { 3.0, 1.0 } };

} // namespace

SyntheticDataset
generate_synthetic(const SyntheticParams& params)
{
  params.validate();
  const std::size_t n = params.n;
  const std::size_t d = params.d;
  const std::size_t k = params.latent_dim;

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SyntheticDataset ds;
  const int width = static_cast<int>(std::to_string(n).size());
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn%0*zu", width, i + 1);
    ds.lesion_ids.emplace_back(buf);
  }

  ds.latent.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < ds.latent.rows(); ++i)
    for (Eigen::Index j = 0; j < ds.latent.cols(); ++j)
      ds.latent(i, j) = normal(rng);

  Eigen::MatrixXd embed(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < embed.rows(); ++i)
    for (Eigen::Index j = 0; j < embed.cols(); ++j)
      embed(i, j) = normal(rng) / std::sqrt(static_cast<double>(k));
  ds.features = ds.latent * embed.transpose();
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
      ds.features(i, j) += params.feature_noise * normal(rng);

  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = ds.latent(static_cast<Eigen::Index>(i), 0);
    ds.labels[i] = z1 + params.noise_cls * normal(rng) > 0.0 ? 1 : 0;
  }

  const double rho = params.label_loading;
  const double rest = std::sqrt(1.0 - rho * rho);
  auto signal = [&](std::size_t i, Feature f) {
    const auto r = static_cast<Eigen::Index>(i);
    switch (f) {
      case Feature::A:
        return ds.latent(r, 0);
      case Feature::B:
        return rho * ds.latent(r, 0) + rest * ds.latent(r, 1);
      case Feature::C:
        return rho * ds.latent(r, 0) + rest * ds.latent(r, 2);
    }
    return 0.0;
  };

  auto& rows = ds.annotations.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = ds.lesion_ids[i];
    const bool student = uniform(rng) < params.student_coverage;
    const bool student_color = uniform(rng) < params.student_color_coverage;
    const bool crowd = uniform(rng) < params.crowd_coverage;
    for (Feature f : kAllFeatures) {
      const auto fi = static_cast<std::size_t>(f);
      const double s = signal(i, f);
      // automated scores: one reading per lesion
      rows.push_back({ id, Source::auto_, f, kAutoAnnotatorId,
                       kAutoScale[fi].center +
                         kAutoScale[fi].spread *
                           (s + params.noise_ann * normal(rng)) });
      if (student && (f != Feature::C || student_color)) {
        const auto [lo, hi] = *raw_scale(Source::student, f);
        for (std::size_t a = 0; a < params.students_per_lesion; ++a) {
          const double v = kStudentScale[fi].center +
                           kStudentScale[fi].spread *
                             (s + params.noise_ann * normal(rng));
          rows.push_back({ id, Source::student, f,
                           "student" + std::to_string(a + 1),
                           std::clamp(v, lo, hi) });
        }
      }
      if (crowd) {
        for (std::size_t a = 0; a < params.crowd_per_lesion; ++a)
          rows.push_back({ id, Source::crowd, f, "crowd" + std::to_string(a + 1),
                           kCrowdScale[fi].center +
                             kCrowdScale[fi].spread *
                               (s + 1.5 * params.noise_ann * normal(rng)) });
      }
    }
  }
  ds.matrix = aggregate(ds.annotations);
  return ds;
}

std::pair<RasterImage, BinaryMask>
render_synthetic_lesion(std::span<const double> latent, int size)
{
  if (latent.size() < 3)
    throw InputError("render needs three latent coordinates");
  const double skew = 0.25 * std::tanh(latent[0]);
  const double ripple = 0.15 / (1.0 + std::exp(-latent[1]));
  const int bands = std::clamp(static_cast<int>(std::lround(2.0 + latent[2])), 1, 6);

  static const std::array<std::array<std::uint8_t, 3>, 6> colors = {
    { { 100, 60, 30 },
      { 180, 120, 80 },
      { 30, 30, 30 },
      { 100, 120, 150 },
      { 204, 51, 51 },
      { 255, 255, 255 } }
  };

  RasterImage image(size, size);
  BinaryMask mask(size, size);
  const double c = size / 2.0;
  const double radius = 0.3 * size;
  for (int r = 0; r < size; ++r) {
    for (int col = 0; col < size; ++col) {
      const double dx = col + 0.5 - c;
      const double dy = r + 0.5 - c;
      const double phi = std::atan2(dy, dx);
      const double bound =
        radius * (1.0 + skew * std::cos(phi) + ripple * std::sin(7.0 * phi)) *
        (1.0 - 0.5 * skew * (1.0 + std::cos(phi)) * (dx > 0 ? 1.0 : 0.0));
      const double dist = std::hypot(dx, dy);
      if (dist <= bound) {
        mask.set(r, col, true);
        const int band = std::min(bands - 1, static_cast<int>(bands * dist / (bound + 1e-9)));
        image.set(r, col, colors[static_cast<std::size_t>(band)]);
      } else {
        image.set(r, col, { 225, 190, 170 });
      }
    }
  }
  return { std::move(image), std::move(mask) };
}

} // namespace lesionkit
