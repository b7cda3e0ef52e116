#include "support.hpp"

#include "lesionkit/aggregate.hpp"
#include "lesionkit/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

using namespace lesionkit;

namespace {

AnnotationTable
pool(std::initializer_list<double> values)
{
  AnnotationTable t;
  int i = 0;
  for (double v : values)
    t.rows.push_back({ "L" + std::to_string(i++), Source::student, Feature::A, "s1", v });
  return t;
}

AnnotationTable
random_table(std::mt19937_64& rng, std::size_t lesions, std::size_t rows)
{
  std::normal_distribution<double> n(3.0, 2.0);
  AnnotationTable t;
  for (std::size_t r = 0; r < rows; ++r)
    t.rows.push_back({ "L" + std::to_string(rng() % lesions), kAllSources[rng() % 4],
                       kAllFeatures[rng() % 3], "a" + std::to_string(rng() % 3), n(rng) });
  return t;
}

} // namespace

TEST_CASE("standardize")
{
  SUBCASE("[1,2,3]")
  {
    const auto s = standardize(pool({ 1, 2, 3 }), Source::student, Feature::A);
    const double z = 1.0 / std::sqrt(2.0 / 3.0);
    REQUIRE(s.z.size() == 3);
    CHECK(s.z[0] == doctest::Approx(-z).epsilon(1e-12));
    CHECK(s.z[1] == 0.0);
    CHECK(s.z[2] == doctest::Approx(z).epsilon(1e-12));
    CHECK(std::abs(s.z[2] - 1.2247) < 1e-4);
    CHECK(s.stats.mean == 2.0);
    CHECK(s.stats.count == 3);
    CHECK_FALSE(s.warning);
  }
  SUBCASE("zero variance pools")
  {
    for (const auto& t : { pool({ 5, 5, 5 }), pool({ 4 }) }) {
      const auto s = standardize(t, Source::student, Feature::A);
      for (double z : s.z)
        CHECK(z == 0.0);
      CHECK(s.warning.has_value());
    }
  }
  SUBCASE("only the requested pool")
  {
    auto t = pool({ 1, 2, 3 });
    t.rows.push_back({ "L9", Source::crowd, Feature::A, "w", 100 });
    const auto s = standardize(t, Source::student, Feature::A);
    CHECK(s.rows == std::vector<std::size_t>{ 0, 1, 2 });
  }
  SUBCASE("empty pool")
  {
    CHECK_THROWS_AS(standardize(pool({ 1, 2 }), Source::crowd, Feature::B), InputError);
  }
  SUBCASE("property: mean 0 and population std 1 before averaging")
  {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
      const auto table = random_table(rng, 30, 5 + rng() % 200);
      const auto st = standardize_table(table);
      std::map<ColumnKey, std::vector<double>> pools;
      for (const auto& r : st.rows)
        pools[r.key].push_back(r.z);
      for (const auto& [key, z] : pools) {
        if (st.stats.at(key).std == 0.0)
          continue;
        double m = 0.0, v = 0.0;
        for (double x : z)
          m += x;
        m /= z.size();
        for (double x : z)
          v += (x - m) * (x - m);
        CHECK(std::abs(m) < 1e-9);
        CHECK(std::abs(std::sqrt(v / z.size()) - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("per-annotator scope")
{
  AnnotationTable t;
  t.rows = { { "L1", Source::student, Feature::A, "s1", 1 },
             { "L2", Source::student, Feature::A, "s1", 3 },
             { "L1", Source::student, Feature::A, "s2", 10 },
             { "L2", Source::student, Feature::A, "s2", 30 } };
  const auto m = aggregate(t, StandardizationScope::annotator);
  const auto& col = *m.column({ Source::student, Feature::A });
  CHECK(*col[0] == doctest::Approx(-1.0));
  CHECK(*col[1] == doctest::Approx(1.0));
  const auto pooled = aggregate(t, StandardizationScope::pool);
  CHECK(*pooled.column({ Source::student, Feature::A })->at(0) != doctest::Approx(-1.0));
}

TEST_CASE("average_per_lesion")
{
  SUBCASE("mean of a lesion's z-scores")
  {
    StandardizedTable st;
    const ColumnKey k{ Source::student, Feature::A };
    for (double z : { 0.5, -0.5, 1.0 })
      st.rows.push_back({ "L1", k, "s", z });
    st.rows.push_back({ "L2", { Source::crowd, Feature::C }, "w", 2.0 });
    const auto m = average_per_lesion(st);
    REQUIRE(m.lesion_ids == std::vector<std::string>{ "L1", "L2" });
    CHECK(*m.column(k)->at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_FALSE(m.available(1, k));
    CHECK_FALSE(m.column(k)->at(1).has_value());
    CHECK_FALSE(m.available(0, { Source::crowd, Feature::C }));
  }
  SUBCASE("one annotation per lesion reproduces the standardized table")
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    AnnotationTable t;
    for (int i = 0; i < 50; ++i)
      t.rows.push_back({ "L" + std::to_string(100 + i), Source::crowd, Feature::B, "w", n(rng) });
    const auto st = standardize_table(t);
    const auto m = average_per_lesion(st);
    for (const auto& r : st.rows)
      CHECK(*m.column(r.key)->at(*m.index_of(r.lesion_id)) == r.z);
  }
}

TEST_CASE("aggregate properties")
{
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto table = random_table(rng, 40, 20 + rng() % 300);
    const auto m = aggregate(table);

    std::set<std::tuple<std::string, Source, Feature>> triples;
    for (const auto& r : table.rows)
      triples.emplace(r.lesion_id, r.source, r.feature);
    std::size_t available = 0;
    for (const auto& [key, col] : m.columns)
      available += m.available_count(key);
    CHECK(available == triples.size());

    std::uniform_real_distribution<double> a(0.1, 10.0), b(-50.0, 50.0);
    auto shifted = table;
    std::map<std::pair<Source, Feature>, std::pair<double, double>> affine;
    for (auto& r : shifted.rows) {
      auto it = affine.try_emplace({ r.source, r.feature }, a(rng), b(rng)).first;
      r.value = it->second.first * r.value + it->second.second;
    }
    const auto m2 = aggregate(shifted);
    REQUIRE(m2.lesion_ids == m.lesion_ids);
    for (const auto& [key, col] : m.columns) {
      const auto& col2 = *m2.column(key);
      for (std::size_t i = 0; i < col.size(); ++i) {
        REQUIRE(col[i].has_value() == col2[i].has_value());
        if (col[i])
          CHECK(std::abs(*col[i] - *col2[i]) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(aggregate(AnnotationTable{}), InputError);
}

TEST_CASE("features.csv round trip")
{
  std::mt19937_64 rng(9);
  const auto m = aggregate(random_table(rng, 25, 200));
  const auto text = matrix_to_csv(m);
  CHECK(matrix_from_csv(text) == m);

  const auto dir = test::scratch_dir("matrix");
  export_matrix(m, dir / "features.csv");
  CHECK(import_matrix(dir / "features.csv") == m);

  bool saw_absent = false;
  for (const auto& line : { text }) {
    saw_absent = line.find(",,0\n") != std::string::npos;
  }
  CHECK(saw_absent);

  const std::string head = "lesion_id,source,feature,value,available\n";
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,mturk,A,0.5,1\n"), InputError);
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,crowd,A,0.5,2\n"), InputError);
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,crowd,A,0.5,0\n"), InputError);
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,crowd,A,,1\n"), InputError);
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,crowd,A,1,1\nL1,crowd,A,2,1\n"), InputError);
  CHECK_THROWS_AS(matrix_from_csv(head + "L1,crowd,A,x,1\n"), InputError);
  CHECK_THROWS_AS(import_matrix(dir / "missing.csv"), InputError);

  const auto simple = matrix_from_csv(head + "L2,crowd,A,,0\nL1,crowd,A,0.25,1\n");
  CHECK(simple.lesion_ids == std::vector<std::string>{ "L1", "L2" });
  CHECK(simple.available(0, { Source::crowd, Feature::A }));
  CHECK_FALSE(simple.available(1, { Source::crowd, Feature::A }));
}

TEST_CASE("column keys")
{
  CHECK(to_string(ColumnKey{ Source::auto_, Feature::B }) == "auto:B");
  CHECK(parse_column_key("student:C") == ColumnKey{ Source::student, Feature::C });
  CHECK_THROWS_AS(parse_column_key("student"), InputError);
  CHECK_THROWS_AS(parse_column_key("student:Q"), InputError);
}
