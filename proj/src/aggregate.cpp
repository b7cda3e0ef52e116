#include "lesionkit/aggregate.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lesionkit {

std::string
to_string(ColumnKey key)
{
  return std::string(to_string(key.source)) + ":" +
         std::string(to_string(key.feature));
}

ColumnKey
parse_column_key(std::string_view token)
{
  const auto colon = token.find(':');
  if (colon == std::string_view::npos)
    throw InputError("expected <source>:<feature>, got \"" +
                     std::string(token) + "\"");
  return { parse_source(token.substr(0, colon)),
           parse_feature(token.substr(colon + 1)) };
}

namespace {

PoolStats
pool_stats(const std::vector<double>& values)
{
  PoolStats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values)
    sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values)
    ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

bool
all_equal(const std::vector<double>& values)
{
  return std::adjacent_find(values.begin(), values.end(),
                            std::not_equal_to<>()) == values.end();
}

std::vector<double>
zscores(const std::vector<double>& values, const PoolStats& s)
{
  std::vector<double> z(values.size(), 0.0);
  if (all_equal(values) || s.std == 0.0)
    return z;
  for (std::size_t i = 0; i < values.size(); ++i)
    z[i] = (values[i] - s.mean) / s.std;
  return z;
}

} // namespace

StandardizedPool
standardize(const AnnotationTable& table, Source source, Feature feature)
{
  StandardizedPool pool;
  std::vector<double> raw;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.source == source && row.feature == feature) {
      pool.rows.push_back(i);
      raw.push_back(row.value);
    }
  }
  if (raw.empty())
    throw InputError("no annotations for " +
                     to_string(ColumnKey{ source, feature }));
  pool.stats = pool_stats(raw);
  pool.z = zscores(raw, pool.stats);
  if (all_equal(raw) || pool.stats.std == 0.0)
    pool.warning = "zero variance in " + to_string(ColumnKey{ source, feature }) +
                   " pool; standardized values set to 0";
  return pool;
}

StandardizedTable
standardize_table(const AnnotationTable& table, StandardizationScope scope)
{
  std::set<ColumnKey> keys;
  for (const auto& row : table.rows)
    keys.insert({ row.source, row.feature });

  StandardizedTable out;
  out.rows.resize(table.rows.size());
  for (ColumnKey key : keys) {
    StandardizedPool pool = standardize(table, key.source, key.feature);
    out.stats[key] = pool.stats;

    if (scope == StandardizationScope::pool) {
      if (pool.warning)
        out.warnings.push_back(*pool.warning);
      for (std::size_t k = 0; k < pool.rows.size(); ++k) {
        const auto& row = table.rows[pool.rows[k]];
        out.rows[pool.rows[k]] = { row.lesion_id, key, row.annotator_id,
                                   pool.z[k] };
      }
      continue;
    }

    std::map<std::string, std::vector<std::size_t>> by_annotator;
    for (std::size_t idx : pool.rows)
      by_annotator[table.rows[idx].annotator_id].push_back(idx);
    for (const auto& [annotator, idxs] : by_annotator) {
      std::vector<double> raw;
      for (std::size_t idx : idxs)
        raw.push_back(table.rows[idx].value);
      const PoolStats s = pool_stats(raw);
      const auto z = zscores(raw, s);
      if (all_equal(raw))
        out.warnings.push_back("zero variance in " + to_string(key) +
                               " pool of annotator " + annotator +
                               "; standardized values set to 0");
      for (std::size_t k = 0; k < idxs.size(); ++k) {
        const auto& row = table.rows[idxs[k]];
        out.rows[idxs[k]] = { row.lesion_id, key, row.annotator_id, z[k] };
      }
    }
  }
  return out;
}

std::optional<std::size_t>
FeatureMatrix::index_of(std::string_view lesion_id) const
{
  auto it = std::lower_bound(lesion_ids.begin(), lesion_ids.end(), lesion_id);
  if (it == lesion_ids.end() || *it != lesion_id)
    return std::nullopt;
  return static_cast<std::size_t>(it - lesion_ids.begin());
}

const std::vector<std::optional<double>>*
FeatureMatrix::column(ColumnKey key) const
{
  auto it = columns.find(key);
  return it == columns.end() ? nullptr : &it->second;
}

bool
FeatureMatrix::available(std::size_t lesion, ColumnKey key) const
{
  const auto* col = column(key);
  return col && (*col)[lesion].has_value();
}

std::size_t
FeatureMatrix::available_count(ColumnKey key) const
{
  const auto* col = column(key);
  if (!col)
    return 0;
  return static_cast<std::size_t>(std::count_if(
    col->begin(), col->end(), [](const auto& v) { return v.has_value(); }));
}

FeatureMatrix
average_per_lesion(const StandardizedTable& table)
{
  FeatureMatrix m;
  std::set<std::string> ids;
  for (const auto& row : table.rows)
    ids.insert(row.lesion_id);
  m.lesion_ids.assign(ids.begin(), ids.end());
  m.stats = table.stats;

  std::map<ColumnKey, std::vector<std::pair<double, std::size_t>>> acc;
  for (const auto& [key, s] : table.stats)
    acc[key].assign(m.lesion_ids.size(), { 0.0, 0 });
  for (const auto& row : table.rows) {
    const std::size_t li = *m.index_of(row.lesion_id);
    auto& column = acc[row.key];
    column.resize(m.lesion_ids.size(), { 0.0, 0 });
    auto& cell = column[li];
    cell.first += row.z;
    cell.second += 1;
  }
  for (const auto& [key, cells] : acc) {
    auto& col = m.columns[key];
    col.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].second > 0)
        col[i] = cells[i].first / static_cast<double>(cells[i].second);
  }
  return m;
}

FeatureMatrix
aggregate(const AnnotationTable& table,
          StandardizationScope scope,
          std::vector<std::string>* warnings)
{
  if (table.empty())
    throw InputError("no annotations to aggregate");
  auto standardized = standardize_table(table, scope);
  if (warnings)
    *warnings = standardized.warnings;
  return average_per_lesion(standardized);
}

std::string
matrix_to_csv(const FeatureMatrix& matrix)
{
  std::string out;
  for (const auto& [key, s] : matrix.stats) {
    out += "# stats," + std::string(to_string(key.source)) + "," +
           std::string(to_string(key.feature)) + "," +
           csv::format_double(s.mean) + "," + csv::format_double(s.std) + "," +
           std::to_string(s.count) + "\n";
  }
  out += "lesion_id,source,feature,value,available\n";
  for (std::size_t i = 0; i < matrix.lesion_ids.size(); ++i) {
    for (const auto& [key, col] : matrix.columns) {
      out += csv::join({ matrix.lesion_ids[i],
                         std::string(to_string(key.source)),
                         std::string(to_string(key.feature)),
                         col[i] ? csv::format_double(*col[i]) : "",
                         col[i] ? "1" : "0" });
      out += "\n";
    }
  }
  return out;
}

FeatureMatrix
matrix_from_csv(std::string_view text, std::string_view origin)
{
  const std::string where(origin);
  FeatureMatrix m;

  // stats comment lines
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.rfind("# stats,", 0) == 0) {
      auto doc = csv::parse(line.substr(2));
      const auto& f = doc.header;
      if (f.size() != 6)
        throw InputError(where + ": line " + std::to_string(line_no) +
                         ": malformed stats line");
      ColumnKey key{ parse_source(f[1]), parse_feature(f[2]) };
      PoolStats s;
      s.mean = csv::parse_double(f[3], "stats mean");
      s.std = csv::parse_double(f[4], "stats std");
      s.count = static_cast<std::size_t>(csv::parse_double(f[5], "stats count"));
      m.stats[key] = s;
    }
    pos = end + 1;
  }

  auto doc = csv::parse(text);
  const std::vector<std::string> header = { "lesion_id", "source", "feature",
                                            "value", "available" };
  if (doc.header != header)
    throw InputError(where +
                     ": expected header `lesion_id,source,feature,value,available`");

  struct Cell
  {
    std::string lesion;
    ColumnKey key;
    std::optional<double> value;
  };
  std::vector<Cell> cells;
  std::set<std::string> ids;
  std::set<std::pair<std::string, ColumnKey>> seen;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& row = doc.rows[i];
    const std::string at = where + ": line " + std::to_string(doc.line_numbers[i]);
    if (row.size() != header.size())
      throw InputError(at + ": expected 5 columns, got " +
                       std::to_string(row.size()));
    try {
      Cell cell{ row[0], { parse_source(row[1]), parse_feature(row[2]) }, {} };
      if (row[4] == "1")
        cell.value = csv::parse_double(row[3], "value");
      else if (row[4] != "0")
        throw InputError("available must be 0 or 1");
      else if (!row[3].empty())
        throw InputError("unavailable cell carries a value");
      if (!seen.insert({ cell.lesion, cell.key }).second)
        throw InputError("duplicate cell for lesion " + cell.lesion);
      ids.insert(cell.lesion);
      cells.push_back(std::move(cell));
    } catch (const InputError& e) {
      throw InputError(at + ": " + e.what());
    }
  }

  m.lesion_ids.assign(ids.begin(), ids.end());
  for (const auto& [key, s] : m.stats)
    m.columns[key].resize(m.lesion_ids.size());
  for (const auto& cell : cells) {
    auto& col = m.columns[cell.key];
    col.resize(m.lesion_ids.size());
    col[*m.index_of(cell.lesion)] = cell.value;
  }
  return m;
}

void
export_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path)
{
  csv::write_text(path, matrix_to_csv(matrix));
}

FeatureMatrix
import_matrix(const std::filesystem::path& path)
{
  return matrix_from_csv(csv::read_text(path), path.string());
}

} // namespace lesionkit
