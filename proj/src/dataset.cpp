#include "lesionkit/dataset.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <set>
#include <unordered_map>
#include <unordered_set>

namespace lesionkit {

namespace {

const std::vector<std::string> kManifestHeader = { "lesion_id", "image_path",
                                                   "mask_path", "diagnosis" };
const std::vector<std::string> kAnnotationHeader = {
  "lesion_id", "source", "feature", "annotator_id", "value"
};

std::filesystem::path
resolve(const std::filesystem::path& base, const std::string& field)
{
  std::filesystem::path p(field);
  if (p.is_relative() && !base.empty())
    return base / p;
  return p;
}

std::string
relative_to(const std::filesystem::path& p, const std::filesystem::path& base)
{
  if (base.empty())
    return p.generic_string();
  auto rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..")
    return p.generic_string();
  return rel.generic_string();
}

} // namespace

std::string_view
to_string(Source source)
{
  switch (source) {
    case Source::auto_:
      return "auto";
    case Source::crowd:
      return "crowd";
    case Source::expert:
      return "expert";
    case Source::student:
      return "student";
  }
  return "?";
}

std::string_view
to_string(Feature feature)
{
  switch (feature) {
    case Feature::A:
      return "A";
    case Feature::B:
      return "B";
    case Feature::C:
      return "C";
  }
  return "?";
}

Source
parse_source(std::string_view token)
{
  for (Source s : kAllSources)
    if (to_string(s) == token)
      return s;
  throw InputError("unknown source \"" + std::string(token) + "\"");
}

Feature
parse_feature(std::string_view token)
{
  for (Feature f : kAllFeatures)
    if (to_string(f) == token)
      return f;
  throw InputError("unknown feature \"" + std::string(token) + "\"");
}

std::optional<std::size_t>
DatasetManifest::find(std::string_view lesion_id) const
{
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].lesion_id == lesion_id)
      return i;
  return std::nullopt;
}

std::optional<std::pair<double, double>>
raw_scale(Source source, Feature feature)
{
  if (source != Source::student)
    return std::nullopt;
  switch (feature) {
    case Feature::A:
      return std::pair{ 0.0, 5.0 };
    case Feature::B:
      return std::pair{ 0.0, 100.0 };
    case Feature::C:
      return std::pair{ 0.0, 15.0 };
  }
  return std::nullopt;
}

DatasetManifest
load_manifest(const std::filesystem::path& path)
{
  auto doc = csv::read_with_header(path, kManifestHeader);
  if (doc.rows.empty())
    throw InputError(path.string() + ": empty manifest");

  DatasetManifest manifest;
  manifest.name = path.stem().string();
  const auto base = path.parent_path();
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& row = doc.rows[i];
    const std::string where =
      path.string() + ": line " + std::to_string(doc.line_numbers[i]);
    LesionRecord rec;
    rec.lesion_id = row[0];
    if (rec.lesion_id.empty())
      throw InputError(where + ": empty lesion_id");
    if (row[1].empty())
      throw InputError(where + ": lesion " + rec.lesion_id +
                       ": empty image_path");
    rec.image_path = resolve(base, row[1]);
    if (!row[2].empty())
      rec.mask_path = resolve(base, row[2]);
    if (row[3] == "0")
      rec.diagnosis = 0;
    else if (row[3] == "1")
      rec.diagnosis = 1;
    else
      throw InputError(where + ": lesion " + rec.lesion_id +
                       ": diagnosis must be 0 or 1, got \"" + row[3] + "\"");
    if (!seen.insert(rec.lesion_id).second)
      throw InputError(where + ": duplicate lesion_id " + rec.lesion_id);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

std::string
manifest_to_csv(const DatasetManifest& manifest,
                const std::filesystem::path& base)
{
  std::string out = csv::join(kManifestHeader) + "\n";
  for (const auto& rec : manifest.records) {
    out += csv::join({ rec.lesion_id, relative_to(rec.image_path, base),
                       rec.mask_path ? relative_to(*rec.mask_path, base) : "",
                       std::to_string(rec.diagnosis) });
    out += "\n";
  }
  return out;
}

void
save_manifest(const DatasetManifest& manifest,
              const std::filesystem::path& path)
{
  csv::write_text(path, manifest_to_csv(manifest, path.parent_path()));
}

AnnotationTable
parse_annotations(std::string_view text, std::string_view origin)
{
  auto doc = csv::parse(text);
  if (doc.header != kAnnotationHeader)
    throw InputError(std::string(origin) +
                     ": expected header "
                     "`lesion_id,source,feature,annotator_id,value`");
  AnnotationTable table;
  table.rows.reserve(doc.rows.size());
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& row = doc.rows[i];
    const std::string where = std::string(origin) + ": row " +
                              std::to_string(i + 1) + " (line " +
                              std::to_string(doc.line_numbers[i]) + ")";
    if (row.size() != kAnnotationHeader.size())
      throw InputError(where + ": expected 5 columns, got " +
                       std::to_string(row.size()));
    try {
      AnnotationRecord rec;
      rec.lesion_id = row[0];
      rec.source = parse_source(row[1]);
      rec.feature = parse_feature(row[2]);
      rec.annotator_id = row[3];
      rec.value = csv::parse_double(row[4], "value");
      table.rows.push_back(std::move(rec));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return table;
}

AnnotationTable
load_annotations(const std::filesystem::path& path)
{
  return parse_annotations(csv::read_text(path), path.string());
}

std::string
annotations_to_csv(const AnnotationTable& table)
{
  std::string out = csv::join(kAnnotationHeader) + "\n";
  for (const auto& rec : table.rows) {
    out += csv::join({ rec.lesion_id, std::string(to_string(rec.source)),
                       std::string(to_string(rec.feature)), rec.annotator_id,
                       csv::format_double(rec.value) });
    out += "\n";
  }
  return out;
}

void
save_annotations(const AnnotationTable& table,
                 const std::filesystem::path& path)
{
  csv::write_text(path, annotations_to_csv(table));
}

ValidationReport
validate_dataset(const DatasetManifest& manifest, const AnnotationTable& table)
{
  ValidationReport report;
  std::unordered_map<std::string, std::size_t> annotated;
  std::unordered_set<std::string> known;
  for (const auto& rec : manifest.records)
    known.insert(rec.lesion_id);

  if (manifest.records.empty())
    report.errors.push_back({ "", "empty manifest" });

  for (const auto& rec : manifest.records) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(rec.image_path, ec))
      report.errors.push_back(
        { rec.lesion_id, "image not found: " + rec.image_path.string() });
    if (rec.mask_path && !std::filesystem::is_regular_file(*rec.mask_path, ec))
      report.errors.push_back(
        { rec.lesion_id, "mask not found: " + rec.mask_path->string() });
  }

  for (const auto& row : table.rows) {
    ++report.counts[{ row.source, row.feature }];
    if (!known.count(row.lesion_id)) {
      report.errors.push_back(
        { row.lesion_id, "annotation references unknown lesion" });
      continue;
    }
    ++annotated[row.lesion_id];
    if (auto scale = raw_scale(row.source, row.feature)) {
      if (!(row.value >= scale->first && row.value <= scale->second))
        report.errors.push_back(
          { row.lesion_id, std::string(to_string(row.source)) + " " +
                             std::string(to_string(row.feature)) + " value " +
                             csv::format_double(row.value) +
                             " outside scale [" +
                             csv::format_double(scale->first) + ", " +
                             csv::format_double(scale->second) + "]" });
    }
  }

  for (const auto& rec : manifest.records)
    if (!annotated.count(rec.lesion_id))
      report.warnings.push_back({ rec.lesion_id, "no annotations" });

  return report;
}

} // namespace lesionkit
