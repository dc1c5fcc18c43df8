#include <catch_amalgamated.hpp>

#include "hdprec/core.hpp"
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

}  // namespace

TEST_CASE("center subtracts column means") {
  Matrix m(2, 1);
  m << 1, 3;
  const auto c = center(Dataset(m));
  CHECK(c.centered());
  CHECK(c.values()(0, 0) == -1.0);
  CHECK(c.values()(1, 0) == 1.0);

  Matrix k(3, 1);
  k << 2, 2, 2;
  CHECK(center(Dataset(k)).values().isZero(0.0));
}

TEST_CASE("center is a fixpoint") {
  const auto once = center(Dataset(testing::normal_matrix(30, 4, 1)));
  const auto twice = center(once);
  CHECK(once.values() == twice.values());
}

TEST_CASE("center needs two rows") {
  Matrix m(1, 2);
  m << 1, 2;
  CHECK(code_of([&] { center(Dataset(m)); }) == ErrorCode::InsufficientData);
}

TEST_CASE("Dataset rejects a false centered flag") {
  Matrix m(2, 1);
  m << 1, 2;
  CHECK_THROWS_AS(Dataset(m, true), Error);
}

TEST_CASE("all off-diagonal index set") {
  const auto s2 = index_set_all_offdiag(2);
  REQUIRE(s2.r() == 2);
  CHECK(s2[0] == IndexPair{0, 1});
  CHECK(s2[1] == IndexPair{1, 0});
  CHECK(index_set_all_offdiag(3).r() == 6);
  CHECK(code_of([] { index_set_all_offdiag(1); }) == ErrorCode::InvalidDimension);

  for (Index p = 2; p <= 50; ++p) CHECK(index_set_all_offdiag(p).r() == p * (p - 1));
}

TEST_CASE("position_of inverts the pair order") {
  const auto s = index_set_all_offdiag(7);
  for (Index l = 0; l < s.r(); ++l) CHECK(s.position_of(s[l]) == l);
  CHECK_FALSE(s.position_of({3, 3}).has_value());
}

TEST_CASE("index sets from blocks") {
  const std::vector<std::vector<Index>> groups{{0, 1}, {2}};
  const auto cross = index_set_from_blocks(groups, 0, 1, 3);
  REQUIRE(cross.r() == 2);
  CHECK(cross[0] == IndexPair{0, 2});
  CHECK(cross[1] == IndexPair{1, 2});

  const auto within = index_set_from_blocks(groups, 0, 0, 3);
  REQUIRE(within.r() == 2);
  CHECK(within[0] == IndexPair{0, 1});
  CHECK(within[1] == IndexPair{1, 0});

  const std::vector<std::vector<Index>> with_empty{{0, 1}, {}};
  CHECK(code_of([&] { index_set_from_blocks(with_empty, 0, 1, 3); }) == ErrorCode::EmptyBlock);
}

TEST_CASE("IndexSet validates its pairs") {
  CHECK_THROWS_AS(IndexSet({{0, 1}, {0, 1}}, 3), Error);
  CHECK_THROWS_AS(IndexSet({{0, 3}}, 3), Error);
  CHECK_THROWS_AS(IndexSet({}, 3), Error);
}

TEST_CASE("band-outside index set") {
  const auto s = index_set_band_outside(5, 2);
  for (const auto& pr : s.pairs()) CHECK(std::abs(pr.first - pr.second) > 2);
  CHECK(s.r() == 6);
}

TEST_CASE("SymMatrix storage is symmetric") {
  SymMatrix m(3);
  m(0, 2) = 5.0;
  CHECK(m(2, 0) == 5.0);
  const auto dense = m.to_dense();
  CHECK(dense == dense.transpose());
  CHECK(SymMatrix::identity(4).to_dense() == Matrix::Identity(4, 4));
  const auto s = index_set_all_offdiag(3);
  const auto v = m.extract(s);
  CHECK(v(s.position_of({0, 2}).value()) == 5.0);
  CHECK(v(s.position_of({2, 0}).value()) == 5.0);
}

TEST_CASE("RngSpec streams are reproducible and distinct") {
  const RngSpec a{42, "x"};
  CHECK(a.engine(3)() == a.engine(3)());
  CHECK(a.engine(3)() != a.engine(4)());
  CHECK(a.engine()() != RngSpec{42, "y"}.engine()());
  CHECK(a.child("c", 1).engine()() == a.child("c", 1).engine()());
  CHECK(a.child("c", 1).engine()() != a.child("c", 2).engine()());
  CHECK(stable_hash("abc") == stable_hash("abc"));
}
