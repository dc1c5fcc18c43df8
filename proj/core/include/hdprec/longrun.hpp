#pragma once

// Kernel long-run covariance of the score series:
//
//   Gamma_k = (1/n) sum_{t>k} eta_t eta_{t-k}'     (Gamma_{-k} = Gamma_k')
//   Xi      = sum_{|k|<n} K(k / S_n) Gamma_k
//   W       = H Xi H,  H = diag(1 / (v_aa v_bb)) over the pairs (a, b) of S
//
// Only diag(W) is needed at scale; Xi itself is materialized for small r.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hdprec/core.hpp"
#include "hdprec/precision.hpp"

namespace hdprec {

enum class KernelKind { QuadraticSpectral, Bartlett };

struct KernelSpec {
  KernelKind kind = KernelKind::QuadraticSpectral;
  // Lags whose weight satisfies |K(k / S_n)| < truncation_eps are skipped.
  double truncation_eps = 1e-4;
};

const char* to_string(KernelKind kind) noexcept;

double kernel_eval(const KernelSpec& spec, double u);

/// K(k / S_n) for k = 0..n-1, with truncated lags set to exactly zero. Every
/// consumer (lag sums, the multiplier covariance A) goes through this table.
std::vector<double> lag_weights(const KernelSpec& spec, double bandwidth, Index n);

struct Ar1Fit {
  double rho = 0.0;             // lag-1 coefficient, clipped to [-0.97, 0.97]
  double innovation_var = 0.0;  // sigma^2
  bool degenerate = false;      // constant series
};

Ar1Fit fit_ar1(std::span<const double> series);

/// AR(1) plug-in rule: QS uses 1.3221 (alpha(2) n)^(1/5), Bartlett uses
/// 1.1447 (alpha(1) n)^(1/3). Clipped to [1, 3 n^(1/5)]. Returns nullopt when
/// every fit is degenerate.
std::optional<double> plugin_bandwidth(std::span<const Ar1Fit> fits, Index n, const KernelSpec& spec);

struct BandwidthEstimate {
  double value = 1.0;
  bool fallback = false;  // BandwidthFallback: all columns constant
  Index columns_used = 0;
};

BandwidthEstimate andrews_bandwidth(const EtaScores& eta, const KernelSpec& spec,
                                    std::uint64_t subsample_seed = 0, Index max_columns = 5000);

Matrix gamma_hat(const Matrix& eta, Index lag);

SymMatrix xi_hat(const EtaScores& eta, double bandwidth, const KernelSpec& spec,
                 std::size_t memory_budget = kDefaultMemoryBudget);

/// h(l) = 1 / (v(a, a) v(b, b)) for the l-th pair (a, b).
Vector h_diag(const SymMatrix& v, const IndexSet& s);

inline constexpr double kVarianceFloor = 1e-8;

struct LongRunDiag {
  Vector w;
  std::vector<Index> floored;  // DegenerateVariance warnings
};

/// diag(W): w(l) = h(l)^2 * sum_k K(k/S_n) (1/n) sum_t eta_{l,t} eta_{l,t-k}.
/// Non-positive lag sums are floored at kVarianceFloor * Gamma_0(l, l).
LongRunDiag w_diag(const EtaScores& eta, std::span<const double> h, double bandwidth,
                   const KernelSpec& spec);

struct LongRunEstimate {
  double bandwidth = 1.0;
  bool bandwidth_fallback = false;
  KernelSpec kernel;
  Vector h_diag;
  Vector w_diag;
  std::vector<Index> floored;
  std::optional<SymMatrix> xi_full;
};

LongRunEstimate estimate_long_run(const EtaScores& eta, const SymMatrix& v, const KernelSpec& spec,
                                  std::optional<double> bandwidth = std::nullopt,
                                  bool materialize_xi = false, std::uint64_t subsample_seed = 0);

/// Entry (a, b) of W = H Xi H, evaluated in the same order as w_diag.
inline double sandwich(double h_a, double xi_ab, double h_b) { return (h_a * xi_ab) * h_b; }

}  // namespace hdprec
