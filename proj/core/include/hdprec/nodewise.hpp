#pragma once

// Node-wise Lasso regressions. Node j regresses y_j on the remaining p - 1
// columns:
//
//   minimize over gamma with gamma_j = -1:
//     (1/n) sum_t (gamma' y_t)^2 + 2 lambda_j sum_{k != j} |gamma_k|
//
// solved by cyclic coordinate descent with covariance (Gram) updates.

#include <optional>
#include <vector>

#include "hdprec/core.hpp"

namespace hdprec {

struct LassoConfig {
  double lambda_scale = 0.5;
  int max_iter = 10000;
  double tol = 1e-7;
  std::optional<std::vector<double>> lambda_override;

  void validate() const;
};

struct NodeFit {
  Vector coef;  // length p, coef(j) == -1
  int iterations = 0;
  bool converged = false;
  double kkt_violation = 0.0;
  // Objective after each sweep; filled only when requested.
  std::vector<double> objective_trace;
};

struct NodewiseFit {
  Matrix alpha;      // p x p, row j = coefficients of node j, alpha(j, j) = -1
  Vector lambda;     // length p
  Matrix residuals;  // n x p, residuals(t, j) = -alpha.row(j) . y_t
  std::vector<int> iterations;
  std::vector<Index> unconverged;  // nodes that hit max_iter (ConvergenceWarning)

  Index n() const noexcept { return residuals.rows(); }
  Index p() const noexcept { return alpha.rows(); }
};

/// lambda_j = lambda_scale * sd(y_j) * sqrt(2 log p / n), or the override.
std::vector<double> default_lambdas(const Dataset& data, const LassoConfig& cfg);

/// (1/n) Y'Y.
Matrix gram_matrix(const Dataset& data);

NodeFit fit_node(const Dataset& data, Index j, double lambda, const LassoConfig& cfg,
                 bool record_objective = false);
NodeFit fit_node(const Matrix& gram, Index j, double lambda, const LassoConfig& cfg,
                 bool record_objective = false);

/// Fits every node (in parallel when OpenMP threads are available). The
/// result does not depend on the schedule.
NodewiseFit fit_all(const Dataset& data, const LassoConfig& cfg);

double lasso_objective(const Matrix& gram, Index j, const Vector& coef, double lambda);

/// Largest violation of the stationarity conditions, measured on the
/// correlation (1/n) sum_t r_t y_{k,t} with r_t = -coef' y_t.
double kkt_violation(const Matrix& gram, Index j, const Vector& coef, double lambda);

}  // namespace hdprec
