#pragma once

// Structure tests, support recovery, bootstrap P-values and BH block testing,
// plus the fit -> v_hat -> omega_hat -> scores -> long-run pipeline they share.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hdprec/bootstrap.hpp"
#include "hdprec/core.hpp"
#include "hdprec/longrun.hpp"
#include "hdprec/nodewise.hpp"
#include "hdprec/precision.hpp"

namespace hdprec {

struct PipelineConfig {
  LassoConfig lasso;
  KernelSpec kernel;
  std::optional<double> bandwidth;  // default: Andrews plug-in per index set
  std::size_t memory_budget = kDefaultMemoryBudget;
  std::uint64_t seed = 0;  // bandwidth column subsampling
};

struct FittedPrecision {
  NodewiseFit fit;
  PrecisionEstimate precision;
};

/// Centers (if needed), fits all nodes, and forms v_hat and omega_hat.
FittedPrecision fit_precision(const Dataset& data, const LassoConfig& lasso);

/// Everything the bootstrap needs for one index set.
struct RegionData {
  EtaScores eta;
  Vector omega_s;
  LongRunEstimate longrun;

  const IndexSet& index_set() const noexcept { return eta.index_set(); }
  std::span<const double> h() const noexcept {
    return {longrun.h_diag.data(), static_cast<std::size_t>(longrun.h_diag.size())};
  }
  std::span<const double> w() const noexcept {
    return {longrun.w_diag.data(), static_cast<std::size_t>(longrun.w_diag.size())};
  }
};

RegionData prepare_region(const FittedPrecision& fitted, IndexSet s, const PipelineConfig& cfg);

struct TestOutcome {
  double statistic = 0.0;
  double quantile = 0.0;
  bool reject = false;
  double p_value = 1.0;
  double alpha = 0.05;
};

/// sqrt(n) max_l |omega_l - c_l|, each term divided by sqrt(w_l) when w is given.
double structure_statistic(std::span<const double> omega_s, std::span<const double> c, Index n,
                           std::optional<std::span<const double>> w = std::nullopt);

/// #{m : stat_m >= statistic} / M.
double p_value(const BootstrapResult& boot, double statistic);

TestOutcome test_structure(std::span<const double> omega_s, std::span<const double> c,
                           const BootstrapResult& boot, Index n, double alpha);

struct SupportEstimate {
  std::vector<IndexPair> selected;
  double alpha = 0.05;
  double quantile = 0.0;
  std::vector<double> thresholds;  // per pair: q / sqrt(n), times sqrt(w_l) when Studentized
};

SupportEstimate recover_support(const SymMatrix& omega_hat, const IndexSet& s, const BootstrapResult& boot,
                                Index n, double alpha);

/// Benjamini-Hochberg step-up; returns the rejected indices in ascending order.
std::vector<std::size_t> bh_select(std::span<const double> p_values, double alpha);

struct BlockTestConfig {
  PipelineConfig pipeline;
  Index draws = 10000;
  double fdr = 0.1;
  bool studentized = true;
  bool within_blocks = false;  // also test h1 == h2 (off-diagonal part of the block)
  RngSpec rng;
};

struct BlockEdge {
  std::size_t h1 = 0;
  std::size_t h2 = 0;
  Index r = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  double bandwidth = 1.0;
  bool rejected = false;
};

struct BlockTestResult {
  std::vector<BlockEdge> edges;
  std::vector<double> lambdas;
};

BlockTestResult block_test_matrix(const Dataset& data, const std::vector<std::vector<Index>>& groups,
                                  const BlockTestConfig& cfg);

}  // namespace hdprec
