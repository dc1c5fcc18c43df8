#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>

#include "hdprec/io.hpp"
#include "test_util.hpp"

using namespace hdprec;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hdprec::Error");
  return ErrorCode::IoError;
}

io::ReturnsSpec raw() {
  io::ReturnsSpec s;
  s.standardize = false;
  return s;
}

}  // namespace

TEST_CASE("CSV parsing") {
  const auto t = io::parse_csv("a, b,\"c,d\"\n1,2,3\n\n4 ,5,6\n");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c,d"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == "4");
  CHECK(io::parse_csv("1,2\n", false).rows.size() == 1);
}

TEST_CASE("cell parsing") {
  CHECK(io::parse_double(" 2.5 ", "x") == 2.5);
  for (const char* cell : {"", "NA", "NaN", "nan", "null"}) {
    CHECK(code_of([&] { io::parse_double(cell, "x"); }) == ErrorCode::MissingValue);
  }
  CHECK(code_of([] { io::parse_double("abc", "x"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { io::parse_double("1.5x", "x"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("doubles round-trip through text") {
  const Matrix m = testing::normal_matrix(7, 4, 3) * 1e-3;
  const Matrix back = io::matrix_from_csv(io::parse_csv(io::matrix_csv(m), false));
  CHECK(back == m);
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, std::numeric_limits<double>::max()}) {
    CHECK(io::parse_double(io::format_double(x), "x") == x);
  }
}

TEST_CASE("dataset files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "hdprec_test_io";
  std::filesystem::create_directories(dir);
  const Matrix m = testing::normal_matrix(5, 3, 8);
  io::write_dataset(dir / "d.csv", Dataset(m));
  const auto back = io::read_dataset(dir / "d.csv");
  CHECK(back.names == std::vector<std::string>{"y1", "y2", "y3"});
  CHECK(back.data.values() == m);
  CHECK(code_of([&] { io::read_dataset(dir / "missing.csv"); }) == ErrorCode::IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("log and simple returns") {
  const auto prices = io::parse_csv("A,B\n100,50\n110,55\n99,60\n");
  const auto log_r = io::returns_from_prices(prices, raw(), nullptr);
  REQUIRE(log_r.data.n() == 2);
  CHECK_THAT(log_r.data.values()(0, 0), WithinAbs(0.095310179804324860, 1e-15));
  auto simple = raw();
  simple.log_returns = false;
  const auto s = io::returns_from_prices(prices, simple, nullptr);
  CHECK_THAT(s.data.values()(0, 0), WithinAbs(0.1, 1e-15));
  CHECK_THAT(s.data.values()(1, 0), WithinAbs(-0.1, 1e-15));
}

TEST_CASE("standardized returns have mean 0 and sd 1") {
  const auto prices = io::parse_csv("A,B\n100,50\n110,55\n99,60\n104,58\n");
  const auto r = io::returns_from_prices(prices, io::ReturnsSpec{}, nullptr);
  for (Index j = 0; j < 2; ++j) {
    const auto col = r.data.values().col(j);
    CHECK(std::abs(col.mean()) < 1e-15);
    CHECK_THAT(col.squaredNorm() / 2.0, WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("bad prices") {
  CHECK(code_of([] { io::returns_from_prices(io::parse_csv("A\n1\n0\n"), raw(), nullptr); }) ==
        ErrorCode::InvalidPrice);
  CHECK(code_of([] { io::returns_from_prices(io::parse_csv("A\n1\n-2\n"), raw(), nullptr); }) ==
        ErrorCode::InvalidPrice);
  CHECK(code_of([] { io::returns_from_prices(io::parse_csv("A,B\n1,2\n,3\n"), raw(), nullptr); }) ==
        ErrorCode::MissingValue);
  CHECK(code_of([] { io::returns_from_prices(io::parse_csv("A\n1\n"), raw(), nullptr); }) ==
        ErrorCode::InsufficientData);
  try {
    io::returns_from_prices(io::parse_csv("A,B\n1,2\n3,0\n"), raw(), nullptr);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2, symbol B") != std::string::npos);
  }
}

TEST_CASE("constant price columns are dropped") {
  const auto r = io::returns_from_prices(io::parse_csv("A,B,C\n1,5,2\n2,5,3\n3,5,1\n"), raw(), nullptr);
  CHECK(r.symbols == std::vector<std::string>{"A", "C"});
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("sd 0") != std::string::npos);
  CHECK(code_of([] { io::returns_from_prices(io::parse_csv("A\n5\n5\n5\n"), raw(), nullptr); }) ==
        ErrorCode::InsufficientData);
}

TEST_CASE("group maps") {
  const auto prices = io::parse_csv("A,B,C,D\n1,2,3,4\n2,1,4,3\n3,3,2,5\n");
  const auto map = io::parse_csv("symbol,group\nA,tech\nB,NA\nC,energy\nD,tech\n");
  const auto r = io::returns_from_prices(prices, raw(), &map);
  CHECK(r.symbols == std::vector<std::string>{"A", "C", "D"});
  CHECK(r.group_names == std::vector<std::string>{"tech", "energy"});
  REQUIRE(r.groups.size() == 2);
  CHECK(r.groups[0] == std::vector<Index>{0, 2});
  CHECK(r.groups[1] == std::vector<Index>{1});
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("B") != std::string::npos);
}
