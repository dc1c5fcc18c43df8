#pragma once

// Kernel-based multiplier bootstrap (KMB) and its Studentized variant (SKMB).
//
// Each draw takes g ~ N(0, A) with A(i, j) = K(|i - j| / S_n), forms
//   s_l = n^{-1/2} h_l sum_t g_t eta_{l,t}       (divided by sqrt(w_l) for SKMB)
// and records max_l |s_l|. Conditional on the data, s ~ N(0, W). Only the
// n x n factor of A and the score columns are touched; no r x r matrix is
// formed.

#include <optional>
#include <span>
#include <vector>

#include "hdprec/core.hpp"
#include "hdprec/longrun.hpp"
#include "hdprec/precision.hpp"

namespace hdprec {

struct BootstrapConfig {
  Index draws = 3000;
  bool studentized = false;
  RngSpec rng;
  KernelSpec kernel;
  std::optional<double> bandwidth;  // default: andrews_bandwidth

  void validate() const;
};

struct BootstrapResult {
  std::vector<double> stats;  // sorted ascending
  double bandwidth = 1.0;
  bool studentized = false;
  std::optional<std::vector<double>> w_diag;
  RngSpec rng;
  double clipped_mass = 0.0;

  Index draws() const noexcept { return static_cast<Index>(stats.size()); }
};

/// A(i, j) = K(|i - j| / S_n), sharing the lag truncation of the long-run sums.
Matrix multiplier_covariance(Index n, double bandwidth, const KernelSpec& kernel);

struct MultiplierFactor {
  Matrix factor;              // L with L L' = A (up to clipped eigenvalues)
  double clipped_mass = 0.0;  // sum of |negative eigenvalues| dropped
  bool cholesky = false;
};

/// Cholesky when A is numerically positive definite, otherwise a symmetric
/// eigendecomposition with negative eigenvalues clipped to zero.
MultiplierFactor gaussian_mult_factor(Index n, double bandwidth, const KernelSpec& kernel,
                                      bool allow_cholesky = true);

/// `w` is required when cfg.studentized is set.
BootstrapResult kmb_draws(const EtaScores& eta, std::span<const double> h, const BootstrapConfig& cfg,
                          std::optional<std::span<const double>> w = std::nullopt);

struct DualBootstrap {
  BootstrapResult plain;
  BootstrapResult studentized;
};

/// KMB and SKMB statistics computed from the same multiplier draws.
DualBootstrap kmb_draws_dual(const EtaScores& eta, std::span<const double> h, std::span<const double> w,
                             const BootstrapConfig& cfg);

/// Full r x M matrix of draw vectors s (test hook; small instances only).
Matrix kmb_draw_vectors(const EtaScores& eta, std::span<const double> h, const BootstrapConfig& cfg,
                        std::optional<std::span<const double>> w = std::nullopt);

/// The ceil(M * level)-th order statistic, i.e. inf{x : F_M(x) >= level}.
double quantile(const BootstrapResult& result, double level);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

std::vector<Interval> confidence_region(std::span<const double> omega_s, double q, Index n, bool studentized,
                                        std::optional<std::span<const double>> w = std::nullopt);

bool region_contains(const std::vector<Interval>& region, std::span<const double> a);

}  // namespace hdprec
