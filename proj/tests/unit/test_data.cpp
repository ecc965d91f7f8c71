#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "irtci/data.hpp"

using namespace irtci;

namespace {

const char* kSchema =
    "# demo\n"
    "column id kind=continuous role=id\n"
    "column smoker kind=binary labels=no|yes\n"
    "column grade kind=ordinal labels=low|mid|high\n"
    "column \"home type\" kind=nominal\n"
    "column age kind=continuous\n"
    "column outcome kind=continuous role=excluded\n";

}  // namespace

TEST_CASE("schema parsing applies label defaults") {
  const auto schema = parse_schema(kSchema);
  REQUIRE(schema.size() == 6);
  CHECK(schema[0].role == ColumnRole::Id);
  CHECK(schema[1].kind == ColumnKind::Binary);
  CHECK(*schema[1].arity == 2);
  CHECK(schema[2].labels == std::vector<std::string>{"low", "mid", "high"});
  CHECK(schema[3].name == "home type");
  CHECK_FALSE(schema[3].arity.has_value());
  CHECK(schema[5].role == ColumnRole::Excluded);

  const auto binary = parse_schema("column b kind=binary\n");
  CHECK(binary[0].labels == std::vector<std::string>{"0", "1"});
  const auto ordinal = parse_schema("column o kind=ordinal arity=3\n");
  CHECK(ordinal[0].labels == std::vector<std::string>{"0", "1", "2"});
}

TEST_CASE("schema errors") {
  CHECK_THROWS_AS(parse_schema("column o kind=ordinal\n"), Error);
  CHECK_THROWS_AS(parse_schema("column b kind=binary arity=3\n"), Error);
  CHECK_THROWS_AS(parse_schema("column x kind=weird\n"), Error);
  CHECK_THROWS_AS(parse_schema("column x kind=nominal\ncolumn x kind=nominal\n"), Error);
  CHECK_THROWS_AS(parse_schema("column o kind=ordinal arity=2 labels=a|b|c\n"), Error);
}

TEST_CASE("schema round trip") {
  const auto schema = parse_schema(kSchema);
  CHECK(parse_schema(format_schema(schema)) == schema);
}

TEST_CASE("csv load maps labels, missing markers and header order") {
  const auto schema = parse_schema(kSchema);
  const std::string csv =
      "outcome,age,\"home type\",grade,smoker,id\n"
      "1.5,30,flat,high,yes,1\n"
      "2.5,,house,NA,-1,2\n"
      "-0.5,41,flat,,no,3\n";
  const auto data = parse_csv(csv, schema, CsvOptions{"NA"});
  REQUIRE(data.rows() == 3);
  REQUIRE(data.cols() == 6);
  const auto smoker = data.index_of("smoker");
  const auto grade = data.index_of("grade");
  const auto home = data.index_of("home type");
  CHECK(smoker == 4);  // header order is kept
  CHECK(data.code(0, smoker) == 1);
  CHECK(data.is_missing(1, smoker));
  CHECK(data.code(0, grade) == 2);
  CHECK(data.is_missing(1, grade));
  CHECK(data.is_missing(2, grade));
  CHECK(data.schema(home).labels == std::vector<std::string>{"flat", "house"});
  CHECK(std::isnan(data.value(1, data.index_of("age"))));
  CHECK(data.value(2, data.index_of("outcome")) == -0.5);
}

TEST_CASE("csv errors") {
  const auto schema = parse_schema("column a kind=binary\ncolumn b kind=ordinal arity=3\n");
  CHECK_THROWS_AS(parse_csv("", schema), Error);
  CHECK_THROWS_AS(parse_csv("a\n1\n", schema), Error);          // schema column absent from file
  CHECK_THROWS_AS(parse_csv("a,b,c\n1,2,3\n", schema), Error);  // unknown column
  CHECK_THROWS_AS(parse_csv("a,b\n1\n", schema), Error);        // short row
  CHECK_THROWS_AS(parse_csv("a,b\n1,7\n", schema), Error);      // unknown label
  try {
    parse_csv("a\n1\n", schema);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
}

TEST_CASE("sentinel cells are emitted as the configured missing token") {
  const auto schema = parse_schema("column a kind=binary\ncolumn b kind=ordinal arity=3\n");
  const auto data = parse_csv("a,b\n1,-1\n,2\n", schema);
  CHECK(format_csv(data) == "a,b\n1,\n,2\n");
  CHECK(format_csv(data, CsvOptions{"NA"}) == "a,b\n1,NA\nNA,2\n");
  CHECK(parse_csv(format_csv(data, CsvOptions{"NA"}), schema, CsvOptions{"NA"}) == data);
}

TEST_CASE("csv escaping round trips awkward text") {
  const auto schema = parse_schema("column n kind=nominal\n");
  const auto data = parse_csv("n\n\"a,b\"\n\"say \"\"hi\"\"\"\n", schema);
  CHECK(data.schema(0).labels == std::vector<std::string>{"a,b", "say \"hi\""});
  CHECK(parse_csv(format_csv(data), data.schemas()) == data);
}

TEST_CASE("empty dataset emits only the header") {
  const auto schema = parse_schema("column a kind=binary\n");
  const CategoricalDataset empty(schema, CodeMatrix(0, 1));
  CHECK(format_csv(empty) == "a\n");
}

TEST_CASE("discretize: equal-frequency bins on 1..100") {
  std::vector<double> values(100);
  std::iota(values.begin(), values.end(), 1.0);
  const auto d = discretize(values, 4);
  std::vector<int> counts(4, 0);
  for (int c : d.codes) ++counts[static_cast<std::size_t>(c)];
  CHECK(counts == std::vector<int>{25, 25, 25, 25});
}

TEST_CASE("discretize: type-7 cut points on {1,2,3,4}") {
  const std::vector<double> values{1, 2, 3, 4};
  const auto d = discretize(values, 4);
  REQUIRE(d.map.cut_points.size() == 3);
  CHECK(d.map.cut_points[0] == doctest::Approx(1.75));
  CHECK(d.map.cut_points[1] == doctest::Approx(2.5));
  CHECK(d.map.cut_points[2] == doctest::Approx(3.25));
  CHECK(d.codes == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("discretize: constant column is degenerate, NaN passes through") {
  const std::vector<double> constant(10, 3.0);
  try {
    discretize(constant, 4);
    FAIL("expected DegenerateColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateColumn);
  }
  const std::vector<double> holes{1, std::numeric_limits<double>::quiet_NaN(), 2, 3, 4, 5};
  const auto d = discretize(holes, 2);
  CHECK(d.codes[1] == kMissing);
}

TEST_CASE("apply_discretization turns continuous features into ordinal columns") {
  const auto schema = parse_schema("column x kind=continuous\ncolumn y kind=continuous role=excluded\n");
  const auto data = parse_csv("x,y\n1,1\n2,2\n3,3\n4,4\n,5\n", schema);
  const auto maps = fit_discretization(data, 2);
  REQUIRE(maps.size() == 1);  // excluded column is never touched
  const auto out = apply_discretization(data, maps);
  CHECK(out.schema(0).kind == ColumnKind::Ordinal);
  CHECK(*out.schema(0).arity == 2);
  CHECK(out.code(0, 0) == 0);
  CHECK(out.code(3, 0) == 1);
  CHECK(out.is_missing(4, 0));
  CHECK(out.schema(1).kind == ColumnKind::Continuous);
}

TEST_CASE("double formatting round trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, 0.0}) {
    CHECK(*parse_double(format_double(v)) == v);
  }
  CHECK_FALSE(parse_double("abc").has_value());
}

TEST_CASE("spec: label encoding examples") {
  const auto binary = parse_schema("column b kind=binary\n");
  const auto data = parse_csv("b\n0\n1\n-1\n", binary);
  CHECK(data.code(0, 0) == 0);
  CHECK(data.code(1, 0) == 1);
  CHECK(data.code(2, 0) == kMissing);

  const auto nominal = parse_schema("column n kind=nominal labels=A|B|C\n");
  const auto coded = parse_csv("n\nC\nA\nB\n", nominal);
  CHECK(coded.code(0, 0) == 2);
  CHECK(coded.code(1, 0) == 0);
  CHECK(coded.code(2, 0) == 1);
  try {
    parse_csv("n\nD\n", nominal);
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
  }
}
