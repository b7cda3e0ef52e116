#pragma once

#include "lesionkit/dataset.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lesionkit {

struct ColumnKey
{
  Source source = Source::student;
  Feature feature = Feature::A;

  auto operator<=>(const ColumnKey&) const = default;
};

std::string to_string(ColumnKey key); // "student:A"
ColumnKey parse_column_key(std::string_view token);

struct PoolStats
{
  double mean = 0.0;
  double std = 0.0; // population
  std::size_t count = 0;

  bool operator==(const PoolStats&) const = default;
};

enum class StandardizationScope
{
  pool,     // one z-score pool per (source, feature)
  annotator // separate pools per annotator within each (source, feature)
};

struct StandardizedPool
{
  std::vector<std::size_t> rows; // indices into the annotation table
  std::vector<double> z;
  PoolStats stats;
  std::optional<std::string> warning; // zero-variance pool
};

//! Z-scores every annotation of (source, feature) against the pool mean and
//! population standard deviation. A zero-variance pool maps to all zeros.
StandardizedPool standardize(const AnnotationTable& table,
                             Source source,
                             Feature feature);

struct StandardizedAnnotation
{
  std::string lesion_id;
  ColumnKey key;
  std::string annotator_id;
  double z = 0.0;
};

struct StandardizedTable
{
  std::vector<StandardizedAnnotation> rows;
  std::map<ColumnKey, PoolStats> stats; // raw pool statistics
  std::vector<std::string> warnings;
};

StandardizedTable standardize_table(
  const AnnotationTable& table,
  StandardizationScope scope = StandardizationScope::pool);

//! Per-lesion, per-column annotation values. A value is present exactly
//! when the lesion had at least one annotation for that column.
struct FeatureMatrix
{
  std::vector<std::string> lesion_ids; // sorted
  std::map<ColumnKey, std::vector<std::optional<double>>> columns;
  std::map<ColumnKey, PoolStats> stats;

  std::size_t size() const { return lesion_ids.size(); }
  std::optional<std::size_t> index_of(std::string_view lesion_id) const;
  const std::vector<std::optional<double>>* column(ColumnKey key) const;
  bool available(std::size_t lesion, ColumnKey key) const;
  std::size_t available_count(ColumnKey key) const;

  bool operator==(const FeatureMatrix&) const = default;
};

FeatureMatrix average_per_lesion(const StandardizedTable& table);

//! standardize_table followed by average_per_lesion.
FeatureMatrix aggregate(const AnnotationTable& table,
                        StandardizationScope scope = StandardizationScope::pool,
                        std::vector<std::string>* warnings = nullptr);

// features.csv: `lesion_id,source,feature,value,available`, preceded by
// `# stats,<source>,<feature>,<mean>,<std>,<count>` comment lines.
std::string matrix_to_csv(const FeatureMatrix& matrix);
FeatureMatrix matrix_from_csv(std::string_view text,
                              std::string_view origin = "features");
void export_matrix(const FeatureMatrix& matrix,
                   const std::filesystem::path& path);
FeatureMatrix import_matrix(const std::filesystem::path& path);

} // namespace lesionkit
