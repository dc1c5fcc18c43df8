#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "hdprec/bootstrap.hpp"
#include "test_util.hpp"

using namespace hdprec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BootstrapConfig config(Index draws, double bandwidth, KernelKind kind = KernelKind::QuadraticSpectral) {
  BootstrapConfig cfg;
  cfg.draws = draws;
  cfg.bandwidth = bandwidth;
  cfg.kernel.kind = kind;
  cfg.rng = RngSpec{7, "boot-test"};
  return cfg;
}

std::span<const double> as_span(const std::vector<double>& v) { return {v.data(), v.size()}; }

BootstrapResult sorted(std::vector<double> stats) {
  BootstrapResult r;
  std::sort(stats.begin(), stats.end());
  r.stats = std::move(stats);
  return r;
}

}  // namespace

TEST_CASE("multiplier factor edge cases") {
  const auto bartlett = gaussian_mult_factor(6, 1.0, KernelSpec{KernelKind::Bartlett});
  CHECK(bartlett.factor == Matrix::Identity(6, 6));

  const auto two = gaussian_mult_factor(2, 1.7, KernelSpec{});
  const Matrix a = multiplier_covariance(2, 1.7, KernelSpec{});
  CHECK(testing::max_abs_diff(two.factor * two.factor.transpose(), a) < 1e-12);

  const auto one = gaussian_mult_factor(1, 3.0, KernelSpec{});
  CHECK(one.factor.rows() == 1);
  CHECK_THAT(std::abs(one.factor(0, 0)), WithinAbs(1.0, 1e-15));

  CHECK_THROWS_AS(gaussian_mult_factor(0, 1.0, KernelSpec{}), Error);
}

TEST_CASE("eigen path reproduces a positive definite A") {
  const KernelSpec k{KernelKind::Bartlett};
  const auto f = gaussian_mult_factor(20, 4.0, k, false);
  CHECK_FALSE(f.cholesky);
  CHECK(testing::max_abs_diff(f.factor * f.factor.transpose(), multiplier_covariance(20, 4.0, k)) < 1e-10);
}

TEST_CASE("zero scores give zero statistics") {
  const auto eta = EtaScores::from_matrix(Matrix::Zero(10, 3));
  const std::vector<double> h{1.0, 2.0, 3.0};
  const auto res = kmb_draws(eta, as_span(h), config(50, 2.0));
  REQUIRE(res.draws() == 50);
  for (double s : res.stats) CHECK(s == 0.0);
}

TEST_CASE("single score column gives a half-normal maximum") {
  Matrix e = testing::normal_matrix(40, 1, 3);
  e /= std::sqrt(e.squaredNorm() / 40.0);
  const std::vector<double> h{1.0};
  const auto res = kmb_draws(EtaScores::from_matrix(e), as_span(h), config(20000, 1.0, KernelKind::Bartlett));
  double mean = 0.0;
  for (double s : res.stats) mean += s;
  mean /= 20000.0;
  double ss = 0.0;
  for (double s : res.stats) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / 19999.0);
  CHECK_THAT(mean, WithinRel(0.79788456080286536, 0.02));
  CHECK_THAT(sd, WithinRel(0.60281027498908697, 0.02));
}

TEST_CASE("draw vectors have covariance H E'AE H / n") {
  const Index n = 4;
  const Matrix e = testing::normal_matrix(n, 3, 11);
  const std::vector<double> h{0.8, 1.0, 1.5};
  const KernelSpec k{KernelKind::Bartlett};
  const Index m = 200000;
  const Matrix s = kmb_draw_vectors(EtaScores::from_matrix(e), as_span(h), config(m, 2.0, KernelKind::Bartlett));
  REQUIRE(s.rows() == 3);
  REQUIRE(s.cols() == m);

  const Vector hv = Eigen::Map<const Vector>(h.data(), 3);
  const Matrix target = hv.asDiagonal() * (e.transpose() * multiplier_covariance(n, 2.0, k) * e / 4.0) *
                        hv.asDiagonal();
  const Matrix cov = s * s.transpose() / static_cast<double>(m);
  for (Index a = 0; a < 3; ++a) {
    for (Index b = 0; b < 3; ++b) {
      const double se = std::sqrt((target(a, a) * target(b, b) + target(a, b) * target(a, b)) / m);
      CHECK(std::abs(cov(a, b) - target(a, b)) <= 4.0 * se);
    }
  }
}

TEST_CASE("quantile picks the ceil(M level)-th order statistic") {
  const auto r = sorted({4.0, 1.0, 3.0, 2.0});
  CHECK(quantile(r, 0.5) == 2.0);
  CHECK(quantile(r, 0.51) == 3.0);
  CHECK(quantile(r, 0.99) == 4.0);
  CHECK(quantile(r, 0.01) == 1.0);

  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[static_cast<std::size_t>(i)] = i + 1.0;
  CHECK(quantile(sorted(hundred), 0.07) == 7.0);

  for (double bad : {0.0, 1.0, -0.1, 1.5}) {
    try {
      quantile(r, bad);
      FAIL("expected InvalidLevel");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidLevel);
    }
  }
}

TEST_CASE("quantile is monotone in the level") {
  const auto eta = EtaScores::from_matrix(testing::normal_matrix(30, 5, 4));
  const std::vector<double> h(5, 1.0);
  const auto res = kmb_draws(eta, as_span(h), config(999, 2.0));
  double prev = -1.0;
  for (int i = 1; i < 100; ++i) {
    const double q = quantile(res, i / 100.0);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("draws do not depend on the thread count") {
  const auto eta = EtaScores::from_matrix(testing::normal_matrix(50, 20, 5));
  const std::vector<double> h(20, 1.0);
  omp_set_num_threads(1);
  const auto a = kmb_draws(eta, as_span(h), config(500, 3.0));
  omp_set_num_threads(4);
  const auto b = kmb_draws(eta, as_span(h), config(500, 3.0));
  CHECK(a.stats == b.stats);
}

TEST_CASE("Studentized statistics ignore column scale") {
  const Matrix e = testing::normal_matrix(30, 4, 6);
  const std::vector<double> h(4, 1.0);
  const std::vector<double> w{1.0, 2.0, 0.5, 3.0};
  Matrix scaled = e;
  std::vector<double> w_scaled = w;
  const double c[4] = {2.0, 0.1, 7.0, 1.0};
  for (Index l = 0; l < 4; ++l) {
    scaled.col(l) *= c[l];
    w_scaled[static_cast<std::size_t>(l)] *= c[l] * c[l];
  }
  auto cfg = config(300, 2.0);
  cfg.studentized = true;
  const auto a = kmb_draws(EtaScores::from_matrix(e), as_span(h), cfg, as_span(w));
  const auto b = kmb_draws(EtaScores::from_matrix(scaled), as_span(h), cfg, as_span(w_scaled));
  for (std::size_t i = 0; i < a.stats.size(); ++i) CHECK_THAT(b.stats[i], WithinRel(a.stats[i], 1e-12));

  CHECK_THROWS_AS(kmb_draws(EtaScores::from_matrix(e), as_span(h), cfg), Error);
}

TEST_CASE("dual draws match the single-mode runs") {
  const auto eta = EtaScores::from_matrix(testing::normal_matrix(25, 6, 9));
  const std::vector<double> h(6, 1.3);
  const std::vector<double> w{1.0, 1.5, 0.7, 2.0, 1.1, 0.9};
  auto cfg = config(200, 2.0);
  const auto dual = kmb_draws_dual(eta, as_span(h), as_span(w), cfg);
  const auto plain = kmb_draws(eta, as_span(h), cfg);
  cfg.studentized = true;
  const auto stud = kmb_draws(eta, as_span(h), cfg, as_span(w));
  CHECK(dual.plain.stats == plain.stats);
  CHECK(dual.studentized.stats == stud.stats);
}

TEST_CASE("confidence region") {
  const std::vector<double> omega{0.5, -1.0};
  const auto plain = confidence_region(as_span(omega), 2.0, 4, false);
  CHECK(plain[0].lower == -0.5);
  CHECK(plain[0].upper == 1.5);
  CHECK(plain[1].lower == -2.0);

  const std::vector<double> w{4.0, 1.0};
  const auto stud = confidence_region(as_span(omega), 2.0, 4, true, as_span(w));
  CHECK(stud[0].lower == -1.5);
  CHECK(stud[0].upper == 2.5);
  CHECK(stud[1].upper == 0.0);

  const std::vector<double> inside{0.0, -1.0};
  const std::vector<double> outside{0.0, 1.0};
  CHECK(region_contains(plain, as_span(inside)));
  CHECK_FALSE(region_contains(plain, as_span(outside)));

  try {
    confidence_region(as_span(omega), 2.0, 4, true);
    FAIL("expected MissingScale");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingScale);
  }
}

TEST_CASE("bootstrap config validation") {
  BootstrapConfig cfg;
  cfg.draws = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.draws = 10;
  cfg.bandwidth = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
