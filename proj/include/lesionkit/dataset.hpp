#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lesionkit {

//! Annotation origin. Declaration order is lexical so that every table
//! keyed by source sorts the same way as its string form.
enum class Source
{
  auto_,
  crowd,
  expert,
  student
};

enum class Feature
{
  A, // asymmetry
  B, // border irregularity
  C  // color
};

inline constexpr Source kAllSources[] = { Source::auto_, Source::crowd,
                                          Source::expert, Source::student };
inline constexpr Feature kAllFeatures[] = { Feature::A, Feature::B,
                                            Feature::C };

std::string_view to_string(Source source);
std::string_view to_string(Feature feature);
//! Throws InputError on an unknown token.
Source parse_source(std::string_view token);
Feature parse_feature(std::string_view token);

struct LesionRecord
{
  std::string lesion_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  int diagnosis = 0; // 0 healthy, 1 abnormal

  bool operator==(const LesionRecord&) const = default;
};

struct DatasetManifest
{
  std::string name;
  std::vector<LesionRecord> records;

  //! Index of `lesion_id` in `records`, if present.
  std::optional<std::size_t> find(std::string_view lesion_id) const;
};

struct AnnotationRecord
{
  std::string lesion_id;
  Source source = Source::student;
  Feature feature = Feature::A;
  std::string annotator_id;
  double value = 0.0;

  bool operator==(const AnnotationRecord&) const = default;
};

struct AnnotationTable
{
  std::vector<AnnotationRecord> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

//! Declared raw scale for (source, feature). Only student scales are known.
std::optional<std::pair<double, double>> raw_scale(Source source,
                                                   Feature feature);

struct Diagnostic
{
  std::string lesion_id;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

struct ValidationReport
{
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;
  std::map<std::pair<Source, Feature>, std::size_t> counts;

  bool accepted() const { return errors.empty(); }
  bool operator==(const ValidationReport&) const = default;
};

// Relative image/mask paths in a manifest are resolved against the
// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
std::string manifest_to_csv(const DatasetManifest& manifest,
                            const std::filesystem::path& base = {});

AnnotationTable load_annotations(const std::filesystem::path& path);
AnnotationTable parse_annotations(std::string_view text,
                                  std::string_view origin = "annotations");
void save_annotations(const AnnotationTable& table,
                      const std::filesystem::path& path);
std::string annotations_to_csv(const AnnotationTable& table);

ValidationReport validate_dataset(const DatasetManifest& manifest,
                                  const AnnotationTable& table);

} // namespace lesionkit
