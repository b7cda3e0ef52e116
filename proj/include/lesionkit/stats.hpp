#pragma once

#include "lesionkit/aggregate.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lesionkit {

enum class StrengthBand
{
  negligible,
  weak,
  moderate,
  strong,
  very_strong
};

std::string_view to_string(StrengthBand band);

//! |r| < .2 negligible, < .4 weak, < .6 moderate, < .8 strong, else very strong.
StrengthBand strength_band(double r);

struct CorrelationResult
{
  double r = 0.0;
  std::size_t n = 0;
  std::string x_label;
  std::string y_label;
  StrengthBand band = StrengthBand::negligible;
};

//! Product-moment correlation. Throws Error("undefined correlation") on
//! zero variance and InputError when fewer than two pairs remain.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
//! Pairwise deletion: pairs with a missing value on either side are dropped.
CorrelationResult pearson(std::span<const std::optional<double>> x,
                          std::span<const std::optional<double>> y);

//! A correlation cell that may be undefined.
struct CorrelationCell
{
  std::optional<CorrelationResult> result;
  std::string reason; // set when result is absent
};

//! Point-biserial correlation of each matrix column with the diagnosis.
//! `labels[i]` belongs to `matrix.lesion_ids[i]`.
std::map<ColumnKey, CorrelationCell> correlation_with_label(
  const FeatureMatrix& matrix,
  std::span<const int> labels);

struct AgreementMatrix
{
  Feature feature = Feature::A;
  std::vector<Source> sources; // lexical order
  std::vector<std::vector<CorrelationCell>> cells;
};

//! Source-by-source correlation for one feature over jointly annotated
//! lesions. Throws InputError when fewer than two sources carry the feature.
AgreementMatrix agreement_matrix(const FeatureMatrix& matrix, Feature feature);

struct BoxSummary
{
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

//! Linear-interpolation quantile on sorted data (inclusive method).
double quantile_sorted(std::span<const double> sorted, double q);

struct KdeCurve
{
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

inline constexpr std::size_t kKdeGridPoints = 256;

//! Silverman's rule of thumb, h = 0.9 min(sd, IQR/1.34) n^(-1/5), falling
//! back to sd when the IQR is zero. Returns nullopt when sd is zero.
std::optional<double> silverman_bandwidth(std::span<const double> values);

//! Gaussian KDE on a 256-point grid over [min - 3h, max + 3h],
//! renormalized to unit trapezoid area on the grid.
std::optional<KdeCurve> gaussian_kde(std::span<const double> values);

struct RaincloudData
{
  int group = 0; // diagnosis
  std::vector<double> points;
  std::optional<KdeCurve> kde; // needs >= 5 points and nonzero spread
  BoxSummary box;
};

std::vector<RaincloudData> raincloud_export(const FeatureMatrix& matrix,
                                            ColumnKey key,
                                            std::span<const int> labels);

//! Long-format CSV `group,kind,x,y`. Box rows carry the quantile level in y.
std::string raincloud_to_csv(const std::vector<RaincloudData>& groups);

//! Draws a permutation of [0, n).
using PermutationSource = std::function<std::vector<std::size_t>(std::size_t)>;

//! Shuffles each column's present values across the lesions that have the
//! column available. Columns are processed in key order from one generator.
FeatureMatrix permute_annotations(const FeatureMatrix& matrix,
                                  std::uint64_t seed);
FeatureMatrix permute_annotations(const FeatureMatrix& matrix,
                                  const PermutationSource& draw);

} // namespace lesionkit
