#include "hdprec/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

namespace hdprec {

FittedPrecision fit_precision(const Dataset& data, const LassoConfig& lasso) {
  const Dataset centered = center(data);
  FittedPrecision out;
  out.fit = fit_all(centered, lasso);
  out.precision = estimate_precision(out.fit);
  return out;
}

RegionData prepare_region(const FittedPrecision& fitted, IndexSet s, const PipelineConfig& cfg) {
  Vector omega_s = fitted.precision.omega_hat.extract(s);
  EtaScores eta(fitted.fit.residuals, fitted.precision.v_hat, std::move(s), cfg.memory_budget);
  LongRunEstimate longrun =
      estimate_long_run(eta, fitted.precision.v_hat, cfg.kernel, cfg.bandwidth, false, cfg.seed);
  return RegionData{std::move(eta), std::move(omega_s), std::move(longrun)};
}

double structure_statistic(std::span<const double> omega_s, std::span<const double> c, Index n,
                           std::optional<std::span<const double>> w) {
  if (omega_s.size() != c.size()) throw Error(ErrorCode::ShapeError, "omega_S and c differ in length");
  if (w && w->size() != omega_s.size()) throw Error(ErrorCode::ShapeError, "w_diag length must equal r");
  const double root_n = std::sqrt(static_cast<double>(n));
  double best = 0.0;
  for (std::size_t l = 0; l < omega_s.size(); ++l) {
    double d = root_n * std::abs(omega_s[l] - c[l]);
    if (w) d /= std::sqrt((*w)[l]);
    best = std::max(best, d);
  }
  return best;
}

double p_value(const BootstrapResult& boot, double statistic) {
  if (boot.stats.empty()) throw Error(ErrorCode::ShapeError, "no bootstrap statistics");
  const auto first = std::lower_bound(boot.stats.begin(), boot.stats.end(), statistic);
  return static_cast<double>(boot.stats.end() - first) / static_cast<double>(boot.stats.size());
}

TestOutcome test_structure(std::span<const double> omega_s, std::span<const double> c,
                           const BootstrapResult& boot, Index n, double alpha) {
  std::optional<std::span<const double>> w;
  if (boot.studentized) {
    if (!boot.w_diag) throw Error(ErrorCode::MissingScale, "Studentized bootstrap result lacks w_diag");
    w = std::span<const double>(*boot.w_diag);
  }
  TestOutcome out;
  out.alpha = alpha;
  out.statistic = structure_statistic(omega_s, c, n, w);
  out.quantile = quantile(boot, 1.0 - alpha);
  out.reject = out.statistic > out.quantile;
  out.p_value = p_value(boot, out.statistic);
  return out;
}

SupportEstimate recover_support(const SymMatrix& omega_hat, const IndexSet& s, const BootstrapResult& boot,
                                Index n, double alpha) {
  if (boot.studentized && (!boot.w_diag || static_cast<Index>(boot.w_diag->size()) != s.r())) {
    throw Error(ErrorCode::MissingScale, "Studentized support recovery needs w_diag of length r");
  }
  SupportEstimate out;
  out.alpha = alpha;
  out.quantile = quantile(boot, 1.0 - alpha);
  const double root_n = std::sqrt(static_cast<double>(n));
  out.thresholds.resize(static_cast<std::size_t>(s.r()));
  for (Index l = 0; l < s.r(); ++l) {
    const double value = std::abs(omega_hat(s[l].first, s[l].second));
    double stat = root_n * value;
    if (boot.studentized) {
      const double wl = (*boot.w_diag)[static_cast<std::size_t>(l)];
      stat /= std::sqrt(wl);
      out.thresholds[static_cast<std::size_t>(l)] = out.quantile * std::sqrt(wl) / root_n;
    } else {
      out.thresholds[static_cast<std::size_t>(l)] = out.quantile / root_n;
    }
    if (stat > out.quantile) out.selected.push_back(s[l]);
  }
  return out;
}

std::vector<std::size_t> bh_select(std::span<const double> p_values, double alpha) {
  const std::size_t k = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidPValue, "p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t cutoff = 0;
  for (std::size_t j = 1; j <= k; ++j) {
    if (p_values[order[j - 1]] <= alpha * static_cast<double>(j) / static_cast<double>(k)) cutoff = j;
  }
  std::vector<std::size_t> rejected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cutoff));
  std::sort(rejected.begin(), rejected.end());
  return rejected;
}

BlockTestResult block_test_matrix(const Dataset& data, const std::vector<std::vector<Index>>& groups,
                                  const BlockTestConfig& cfg) {
  if (!(cfg.fdr > 0.0 && cfg.fdr < 1.0)) throw Error(ErrorCode::InvalidConfig, "FDR level must lie in (0, 1)");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t h1 = 0; h1 < groups.size(); ++h1) {
    if (groups[h1].empty()) throw Error(ErrorCode::EmptyBlock, "group " + std::to_string(h1) + " is empty");
    if (cfg.within_blocks && groups[h1].size() >= 2) pairs.emplace_back(h1, h1);
    for (std::size_t h2 = h1 + 1; h2 < groups.size(); ++h2) pairs.emplace_back(h1, h2);
  }

  const FittedPrecision fitted = fit_precision(data, cfg.pipeline.lasso);
  BlockTestResult out;
  out.lambdas.assign(fitted.fit.lambda.data(), fitted.fit.lambda.data() + fitted.fit.lambda.size());
  out.edges.resize(pairs.size());
  std::vector<std::string> failures(pairs.size());
  const Index p = data.p();
  const Index n = data.n();
  const auto k = static_cast<Index>(pairs.size());

#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index i = 0; i < k; ++i) {
    const auto [h1, h2] = pairs[static_cast<std::size_t>(i)];
    try {
      RegionData region = prepare_region(fitted, index_set_from_blocks(groups, h1, h2, p), cfg.pipeline);
      BootstrapConfig boot_cfg;
      boot_cfg.draws = cfg.draws;
      boot_cfg.studentized = cfg.studentized;
      boot_cfg.kernel = cfg.pipeline.kernel;
      boot_cfg.bandwidth = region.longrun.bandwidth;
      boot_cfg.rng = cfg.rng.child("block", static_cast<std::uint64_t>(h1 * groups.size() + h2));
      const auto boot = cfg.studentized ? kmb_draws(region.eta, region.h(), boot_cfg, region.w())
                                        : kmb_draws(region.eta, region.h(), boot_cfg);
      const std::vector<double> zeros(static_cast<std::size_t>(region.omega_s.size()), 0.0);
      const auto outcome = test_structure(
          std::span<const double>(region.omega_s.data(), static_cast<std::size_t>(region.omega_s.size())), zeros,
          boot, n, cfg.fdr);
      auto& edge = out.edges[static_cast<std::size_t>(i)];
      edge.h1 = h1;
      edge.h2 = h2;
      edge.r = region.eta.r();
      edge.statistic = outcome.statistic;
      edge.p_value = outcome.p_value;
      edge.bandwidth = region.longrun.bandwidth;
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      throw Error(ErrorCode::InvalidInput, "block (" + std::to_string(pairs[i].first) + "," +
                                               std::to_string(pairs[i].second) + "): " + failures[i]);
    }
  }

  std::vector<double> pv(out.edges.size());
  for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = out.edges[i].p_value;
  for (std::size_t i : bh_select(pv, cfg.fdr)) out.edges[i].rejected = true;
  return out;
}

}  // namespace hdprec
