#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include <omp.h>

#include "hdprec/nodewise.hpp"
#include "test_util.hpp"

using namespace hdprec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Gram matrix of the p = 2 example: (1/n) sum y2^2 = 1, (1/n) sum y1 y2 = 0.5.
Matrix two_by_two() {
  Matrix g(2, 2);
  g << 1.0, 0.5, 0.5, 1.0;
  return g;
}

}  // namespace

TEST_CASE("default lambda closed form") {
  // Column with sd exactly 1: alternate +-1 has sample sd sqrt(n / (n - 1)), so rescale.
  const Index n = 200;
  const Index p = 100;
  Matrix y = testing::normal_matrix(n, p, 5);
  Dataset d = center(Dataset(y));
  Matrix c = d.values();
  for (Index j = 0; j < p; ++j) c.col(j) /= std::sqrt(c.col(j).squaredNorm() / static_cast<double>(n - 1));
  const auto lambdas = default_lambdas(Dataset(c, true), LassoConfig{});
  for (double l : lambdas) CHECK_THAT(l, WithinAbs(0.10729830131446736, 1e-12));
}

TEST_CASE("lambda override is returned verbatim") {
  LassoConfig cfg;
  cfg.lambda_override = std::vector<double>{0.3, 0.4, 0.5};
  const auto l = default_lambdas(testing::normal_dataset(20, 3, 1), cfg);
  CHECK(l == *cfg.lambda_override);
}

TEST_CASE("constant column is degenerate") {
  Matrix y = testing::normal_matrix(20, 3, 2);
  y.col(1).setConstant(4.0);
  try {
    default_lambdas(center(Dataset(y)), LassoConfig{});
    FAIL("expected DegenerateColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateColumn);
  }
}

TEST_CASE("single-coordinate soft threshold") {
  LassoConfig cfg;
  const auto fit = fit_node(two_by_two(), 0, 0.2, cfg);
  CHECK(fit.coef(0) == -1.0);
  CHECK_THAT(fit.coef(1), WithinAbs(0.3, 1e-10));

  // Grid search over gamma_2 confirms the minimizer.
  double best = 1e300;
  double arg = 0.0;
  for (int i = -2000; i <= 2000; ++i) {
    Vector g(2);
    g << -1.0, i * 1e-3;
    const double obj = lasso_objective(two_by_two(), 0, g, 0.2);
    if (obj < best) {
      best = obj;
      arg = g(1);
    }
  }
  CHECK_THAT(arg, WithinAbs(0.3, 1e-3));

  CHECK(fit_node(two_by_two(), 0, 0.6, cfg).coef(1) == 0.0);
}

TEST_CASE("vanishing lambda gives OLS") {
  const auto d = testing::normal_dataset(200, 5, 9);
  LassoConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iter = 100000;
  const auto fit = fit_node(d, 2, 1e-10, cfg);
  Matrix x(200, 4);
  x << d.values().leftCols(2), d.values().rightCols(2);
  const Vector beta = x.colPivHouseholderQr().solve(d.values().col(2));
  CHECK_THAT(fit.coef(0), WithinAbs(beta(0), 1e-7));
  CHECK_THAT(fit.coef(1), WithinAbs(beta(1), 1e-7));
  CHECK_THAT(fit.coef(3), WithinAbs(beta(2), 1e-7));
  CHECK_THAT(fit.coef(4), WithinAbs(beta(3), 1e-7));
}

TEST_CASE("fit_all shapes and residual identity") {
  const auto d = testing::normal_dataset(50, 2, 3);
  const auto fit = fit_all(d, LassoConfig{});
  REQUIRE(fit.alpha.rows() == 2);
  REQUIRE(fit.alpha.cols() == 2);
  CHECK(fit.alpha(0, 0) == -1.0);
  CHECK(fit.alpha(1, 1) == -1.0);

  const auto d2 = testing::normal_dataset(60, 6, 4);
  const auto f2 = fit_all(d2, LassoConfig{});
  const Matrix expected = -(d2.values() * f2.alpha.transpose());
  CHECK(testing::max_abs_diff(f2.residuals, expected) == 0.0);
  for (Index j = 0; j < f2.lambda.size(); ++j) CHECK(f2.lambda(j) > 0.0);
}

TEST_CASE("duplicated column with large lambda is fully penalized") {
  Matrix y = testing::normal_matrix(40, 3, 6);
  y.col(1) = y.col(0);
  const auto d = center(Dataset(y));
  LassoConfig cfg;
  cfg.lambda_override = std::vector<double>{100.0, 100.0, 100.0};
  const auto fit = fit_all(d, cfg);
  for (Index j = 0; j < 3; ++j) {
    for (Index k = 0; k < 3; ++k) {
      if (j != k) CHECK(fit.alpha(j, k) == 0.0);
    }
  }
  CHECK(fit.residuals == d.values());
}

TEST_CASE("identity covariance keeps coefficients small") {
  const auto d = testing::normal_dataset(2000, 5, 11);
  const auto fit = fit_all(d, LassoConfig{});
  Matrix off = fit.alpha;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("KKT certificate on random problems") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> dim(20, 100);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = dim(rng);
    const Index p = dim(rng);
    const auto d = testing::normal_dataset(n, p, 1000 + rep);
    const auto fit = fit_all(d, LassoConfig{});
    const Matrix g = gram_matrix(d);
    for (Index j = 0; j < p; ++j) {
      const Vector coef = fit.alpha.row(j).transpose();
      CHECK(kkt_violation(g, j, coef, fit.lambda(j)) <= LassoConfig{}.tol);
    }
  }
}

TEST_CASE("objective is non-increasing across sweeps") {
  const auto d = testing::normal_dataset(40, 30, 21);
  const Matrix g = gram_matrix(d);
  const auto fit = fit_node(g, 4, 0.05, LassoConfig{}, true);
  REQUIRE(fit.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
    CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1] + 1e-14);
  }
}

TEST_CASE("column permutation permutes alpha") {
  const auto d = testing::normal_dataset(80, 8, 31);
  std::vector<Index> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  Matrix permuted(80, 8);
  for (Index k = 0; k < 8; ++k) permuted.col(k) = d.values().col(perm[static_cast<std::size_t>(k)]);
  LassoConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iter = 100000;
  const auto a = fit_all(d, cfg);
  const auto b = fit_all(Dataset(permuted, true), cfg);
  for (Index j = 0; j < 8; ++j) {
    for (Index k = 0; k < 8; ++k) {
      CHECK_THAT(b.alpha(j, k),
                 WithinAbs(a.alpha(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(k)]), 1e-8));
    }
  }
}

TEST_CASE("rescaling the response with its lambda keeps a KKT point") {
  const auto d = testing::normal_dataset(60, 10, 41);
  const Index j = 2;
  const double lambda = 0.08;
  const double c = 3.0;
  const auto fit = fit_node(d, j, lambda, LassoConfig{});
  Matrix scaled = d.values();
  scaled.col(j) *= c;
  Vector mapped = c * fit.coef;
  mapped(j) = -1.0;
  const Matrix g = gram_matrix(Dataset(scaled, true));
  CHECK(kkt_violation(g, j, mapped, c * lambda) <= c * LassoConfig{}.tol + 1e-12);
  // Default lambdas scale with sd(y_j), so the rescaled problem gets c * lambda.
  const auto before = default_lambdas(d, LassoConfig{});
  const auto after = default_lambdas(Dataset(scaled, true), LassoConfig{});
  CHECK_THAT(after[static_cast<std::size_t>(j)], WithinRel(c * before[static_cast<std::size_t>(j)], 1e-12));
}

TEST_CASE("NaN in data is rejected") {
  Matrix y = testing::normal_matrix(10, 3, 1);
  y(4, 1) = std::nan("");
  Dataset d(y, false);
  CHECK_THROWS_AS(fit_node(d, 0, 0.1, LassoConfig{}), Error);
}

TEST_CASE("fit_all is independent of thread count") {
  const auto d = testing::normal_dataset(100, 40, 51);
  const auto a = fit_all(d, LassoConfig{});
  omp_set_num_threads(1);
  const auto b = fit_all(d, LassoConfig{});
  omp_set_num_threads(4);
  const auto c = fit_all(d, LassoConfig{});
  CHECK(a.alpha == b.alpha);
  CHECK(a.alpha == c.alpha);
}
