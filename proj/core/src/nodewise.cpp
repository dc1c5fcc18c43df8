#include "hdprec/nodewise.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace hdprec {

namespace {

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

void check_finite(const Dataset& data) {
  if (!data.values().allFinite()) {
    throw Error(ErrorCode::InvalidInput, "data contains NaN or infinite values");
  }
}

}  // namespace

void LassoConfig::validate() const {
  if (!(lambda_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda_scale must be positive");
  if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be positive");
  if (lambda_override) {
    for (double l : *lambda_override) {
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw Error(ErrorCode::InvalidConfig, "lambda_override entries must be positive");
      }
    }
  }
}

std::vector<double> default_lambdas(const Dataset& data, const LassoConfig& cfg) {
  cfg.validate();
  const Index p = data.p();
  if (cfg.lambda_override) {
    if (static_cast<Index>(cfg.lambda_override->size()) != p) {
      throw Error(ErrorCode::ShapeError, "lambda_override must have length p");
    }
    return *cfg.lambda_override;
  }
  require_centered(data, "default_lambdas");
  const auto n = static_cast<double>(data.n());
  const double rate = std::sqrt(2.0 * std::log(static_cast<double>(p)) / n);
  std::vector<double> out(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const auto col = data.values().col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (n - 1.0);
    if (!(var > 0.0)) {
      throw Error(ErrorCode::DegenerateColumn, "column " + std::to_string(j) + " has zero variance");
    }
    out[static_cast<std::size_t>(j)] = cfg.lambda_scale * std::sqrt(var) * rate;
  }
  return out;
}

Matrix gram_matrix(const Dataset& data) {
  const auto& y = data.values();
  Matrix g = Matrix::Zero(y.cols(), y.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), 1.0 / static_cast<double>(y.rows()));
  return g.selfadjointView<Eigen::Lower>();
}

double lasso_objective(const Matrix& gram, Index j, const Vector& coef, double lambda) {
  double penalty = 0.0;
  for (Index k = 0; k < coef.size(); ++k) {
    if (k != j) penalty += std::abs(coef(k));
  }
  return coef.dot(gram * coef) + 2.0 * lambda * penalty;
}

double kkt_violation(const Matrix& gram, Index j, const Vector& coef, double lambda) {
  // (1/n) sum_t r_t y_{k,t} = -(G coef)_k
  const Vector corr = -(gram * coef);
  double worst = 0.0;
  for (Index k = 0; k < coef.size(); ++k) {
    if (k == j) continue;
    const double v = coef(k) == 0.0 ? std::max(0.0, std::abs(corr(k)) - lambda)
                                     : std::abs(corr(k) - lambda * (coef(k) > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

NodeFit fit_node(const Dataset& data, Index j, double lambda, const LassoConfig& cfg,
                 bool record_objective) {
  require_centered(data, "fit_node");
  check_finite(data);
  return fit_node(gram_matrix(data), j, lambda, cfg, record_objective);
}

NodeFit fit_node(const Matrix& gram, Index j, double lambda, const LassoConfig& cfg,
                 bool record_objective) {
  cfg.validate();
  const Index p = gram.rows();
  if (j < 0 || j >= p) throw Error(ErrorCode::InvalidDimension, "node index out of range");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda must be positive");
  if (!gram.allFinite()) throw Error(ErrorCode::InvalidInput, "Gram matrix is not finite");

  NodeFit fit;
  fit.coef = Vector::Zero(p);
  fit.coef(j) = -1.0;
  // corr(k) = (1/n) sum_t r_t y_{k,t} with r_t = y_{j,t} - sum_m beta_m y_{m,t}
  Vector corr = gram.col(j);

  if (record_objective) fit.objective_trace.push_back(lasso_objective(gram, j, fit.coef, lambda));

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    double max_change = 0.0;
    for (Index k = 0; k < p; ++k) {
      if (k == j) continue;
      const double gkk = gram(k, k);
      if (!(gkk > 0.0)) continue;
      const double old = fit.coef(k);
      const double updated = soft_threshold(corr(k) + gkk * old, lambda) / gkk;
      const double delta = updated - old;
      if (delta != 0.0) {
        fit.coef(k) = updated;
        corr.noalias() -= delta * gram.col(k);
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.iterations = iter;
    if (record_objective) fit.objective_trace.push_back(lasso_objective(gram, j, fit.coef, lambda));
    if (max_change < cfg.tol) {
      fit.kkt_violation = kkt_violation(gram, j, fit.coef, lambda);
      if (fit.kkt_violation <= cfg.tol) {
        fit.converged = true;
        break;
      }
    }
  }
  if (!fit.converged) fit.kkt_violation = kkt_violation(gram, j, fit.coef, lambda);
  return fit;
}

NodewiseFit fit_all(const Dataset& data, const LassoConfig& cfg) {
  require_centered(data, "fit_all");
  check_finite(data);
  if (data.n() < 4 || data.p() < 2) {
    throw Error(ErrorCode::InvalidDimension, "node-wise fitting needs n >= 4 and p >= 2");
  }
  const std::vector<double> lambdas = default_lambdas(data, cfg);
  const Matrix gram = gram_matrix(data);
  const Index p = data.p();

  NodewiseFit out;
  out.alpha = Matrix::Zero(p, p);
  out.lambda = Eigen::Map<const Vector>(lambdas.data(), p);
  out.iterations.assign(static_cast<std::size_t>(p), 0);
  std::vector<char> converged(static_cast<std::size_t>(p), 1);
  std::vector<std::string> failures(static_cast<std::size_t>(p));

#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index j = 0; j < p; ++j) {
    try {
      NodeFit node = fit_node(gram, j, lambdas[static_cast<std::size_t>(j)], cfg);
      out.alpha.row(j) = node.coef.transpose();
      out.iterations[static_cast<std::size_t>(j)] = node.iterations;
      converged[static_cast<std::size_t>(j)] = node.converged ? 1 : 0;
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(j)] = e.what();
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (!failures[static_cast<std::size_t>(j)].empty()) {
      throw Error(ErrorCode::InvalidInput,
                  "node " + std::to_string(j) + ": " + failures[static_cast<std::size_t>(j)]);
    }
    if (!converged[static_cast<std::size_t>(j)]) out.unconverged.push_back(j);
  }
  out.residuals = -(data.values() * out.alpha.transpose());
  return out;
}

}  // namespace hdprec
