#include "lesionkit/stats.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace lesionkit {

std::string_view
to_string(StrengthBand band)
{
  switch (band) {
    case StrengthBand::negligible:
      return "negligible";
    case StrengthBand::weak:
      return "weak";
    case StrengthBand::moderate:
      return "moderate";
    case StrengthBand::strong:
      return "strong";
    case StrengthBand::very_strong:
      return "very_strong";
  }
  return "?";
}

StrengthBand
strength_band(double r)
{
  const double a = std::abs(r);
  if (a < 0.20)
    return StrengthBand::negligible;
  if (a < 0.40)
    return StrengthBand::weak;
  if (a < 0.60)
    return StrengthBand::moderate;
  if (a < 0.80)
    return StrengthBand::strong;
  return StrengthBand::very_strong;
}

CorrelationResult
pearson(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size())
    throw InputError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2)
    throw InputError("pearson: need at least 2 pairs");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error("undefined correlation");
  CorrelationResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  res.n = n;
  res.band = strength_band(res.r);
  return res;
}

CorrelationResult
pearson(std::span<const std::optional<double>> x,
        std::span<const std::optional<double>> y)
{
  if (x.size() != y.size())
    throw InputError("pearson: length mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i]) {
      xs.push_back(*x[i]);
      ys.push_back(*y[i]);
    }
  }
  return pearson(std::span<const double>(xs), std::span<const double>(ys));
}

namespace {

CorrelationCell
safe_pearson(std::span<const std::optional<double>> x,
             std::span<const std::optional<double>> y,
             std::string x_label,
             std::string y_label)
{
  CorrelationCell cell;
  try {
    auto res = pearson(x, y);
    res.x_label = std::move(x_label);
    res.y_label = std::move(y_label);
    cell.result = std::move(res);
  } catch (const Error& e) {
    cell.reason = e.what();
  }
  return cell;
}

} // namespace

std::map<ColumnKey, CorrelationCell>
correlation_with_label(const FeatureMatrix& matrix, std::span<const int> labels)
{
  if (labels.size() != matrix.size())
    throw InputError("correlation_with_label: one label per lesion required");
  std::vector<std::optional<double>> y(labels.begin(), labels.end());
  std::map<ColumnKey, CorrelationCell> out;
  for (const auto& [key, col] : matrix.columns)
    out[key] = safe_pearson(col, y, to_string(key), "diagnosis");
  return out;
}

AgreementMatrix
agreement_matrix(const FeatureMatrix& matrix, Feature feature)
{
  AgreementMatrix out;
  out.feature = feature;
  for (const auto& [key, col] : matrix.columns)
    if (key.feature == feature)
      out.sources.push_back(key.source);
  if (out.sources.size() < 2)
    throw InputError("agreement matrix needs at least two sources for feature " +
                     std::string(to_string(feature)));

  const std::size_t k = out.sources.size();
  out.cells.assign(k, std::vector<CorrelationCell>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const ColumnKey ki{ out.sources[i], feature };
    const auto& ci = *matrix.column(ki);
    CorrelationResult diag;
    diag.r = 1.0;
    diag.n = matrix.available_count(ki);
    diag.x_label = diag.y_label = to_string(ki);
    diag.band = StrengthBand::very_strong;
    out.cells[i][i].result = diag;
    for (std::size_t j = i + 1; j < k; ++j) {
      const ColumnKey kj{ out.sources[j], feature };
      out.cells[i][j] =
        safe_pearson(ci, *matrix.column(kj), to_string(ki), to_string(kj));
      out.cells[j][i] = out.cells[i][j];
      if (out.cells[j][i].result)
        std::swap(out.cells[j][i].result->x_label,
                  out.cells[j][i].result->y_label);
    }
  }
  return out;
}

double
quantile_sorted(std::span<const double> sorted, double q)
{
  if (sorted.empty())
    throw InputError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::optional<double>
silverman_bandwidth(std::span<const double> values)
{
  const std::size_t n = values.size();
  if (n < 2)
    return std::nullopt;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean =
    std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sorted)
    ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0))
    return std::nullopt;
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::optional<KdeCurve>
gaussian_kde(std::span<const double> values)
{
  const auto h = silverman_bandwidth(values);
  if (!h)
    return std::nullopt;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it - 3.0 * *h;
  const double hi = *hi_it + 3.0 * *h;

  KdeCurve kde;
  kde.bandwidth = *h;
  kde.grid.resize(kKdeGridPoints);
  kde.density.resize(kKdeGridPoints);
  const double step = (hi - lo) / static_cast<double>(kKdeGridPoints - 1);
  const double norm = 1.0 / (static_cast<double>(values.size()) * *h *
                             std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < kKdeGridPoints; ++g) {
    const double x = lo + step * static_cast<double>(g);
    double acc = 0.0;
    for (double v : values) {
      const double u = (x - v) / *h;
      acc += std::exp(-0.5 * u * u);
    }
    kde.grid[g] = x;
    kde.density[g] = acc * norm;
  }
  // Tails beyond the grid and trapezoid error are folded back in.
  double area = 0.0;
  for (std::size_t g = 1; g < kKdeGridPoints; ++g)
    area += 0.5 * step * (kde.density[g] + kde.density[g - 1]);
  for (double& d : kde.density)
    d /= area;
  return kde;
}

std::vector<RaincloudData>
raincloud_export(const FeatureMatrix& matrix,
                 ColumnKey key,
                 std::span<const int> labels)
{
  if (labels.size() != matrix.size())
    throw InputError("raincloud_export: one label per lesion required");
  const auto* col = matrix.column(key);
  if (!col)
    throw InputError("raincloud_export: no column " + to_string(key));

  std::vector<RaincloudData> out;
  for (int group : { 0, 1 }) {
    RaincloudData data;
    data.group = group;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == group && (*col)[i])
        data.points.push_back(*(*col)[i]);
    if (data.points.empty())
      throw InputError("raincloud_export: empty group " +
                       std::to_string(group) + " for " + to_string(key));
    std::vector<double> sorted = data.points;
    std::sort(sorted.begin(), sorted.end());
    data.box = { sorted.front(), quantile_sorted(sorted, 0.25),
                 quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75),
                 sorted.back() };
    if (data.points.size() >= 5)
      data.kde = gaussian_kde(data.points);
    out.push_back(std::move(data));
  }
  return out;
}

std::string
raincloud_to_csv(const std::vector<RaincloudData>& groups)
{
  using csv::format_double;
  std::string out = "group,kind,x,y\n";
  for (const auto& g : groups) {
    const std::string group = std::to_string(g.group);
    for (double p : g.points)
      out += group + ",point," + format_double(p) + ",0\n";
    if (g.kde)
      for (std::size_t i = 0; i < g.kde->grid.size(); ++i)
        out += group + ",kde," + format_double(g.kde->grid[i]) + "," +
               format_double(g.kde->density[i]) + "\n";
    const std::pair<double, double> box[] = { { g.box.min, 0.0 },
                                              { g.box.q1, 0.25 },
                                              { g.box.median, 0.5 },
                                              { g.box.q3, 0.75 },
                                              { g.box.max, 1.0 } };
    for (auto [x, level] : box)
      out += group + ",box," + format_double(x) + "," + format_double(level) +
             "\n";
  }
  return out;
}

FeatureMatrix
permute_annotations(const FeatureMatrix& matrix, const PermutationSource& draw)
{
  FeatureMatrix out = matrix;
  for (auto& [key, col] : out.columns) {
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < col.size(); ++i)
      if (col[i])
        present.push_back(i);
    const auto perm = draw(present.size());
    if (perm.size() != present.size())
      throw Error("permutation source returned the wrong length");
    const auto& src = matrix.columns.at(key);
    for (std::size_t k = 0; k < present.size(); ++k)
      col[present[k]] = src[present[perm[k]]];
  }
  return out;
}

FeatureMatrix
permute_annotations(const FeatureMatrix& matrix, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return permute_annotations(matrix, [&rng](std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
  });
}

} // namespace lesionkit
