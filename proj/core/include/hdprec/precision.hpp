#pragma once

// Bias-corrected residual covariance v_hat, the precision estimate
// omega_hat = diag(v)^-1 v diag(v)^-1, and the per-pair score series eta_hat.

#include <cstddef>

#include "hdprec/core.hpp"
#include "hdprec/nodewise.hpp"

namespace hdprec {

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{1} << 31;

struct PrecisionEstimate {
  SymMatrix v_hat;
  SymMatrix omega_hat;
};

/// v(j, j) = (1/n) sum_t e_j^2;
/// v(a, b) = -(1/n) sum_t (e_a e_b + alpha(a, b) e_b^2 + alpha(b, a) e_a^2) for a != b.
SymMatrix estimate_v(const Matrix& residuals, const Matrix& alpha);
SymMatrix estimate_v(const NodewiseFit& fit);

SymMatrix estimate_omega(const SymMatrix& v);

PrecisionEstimate estimate_precision(const NodewiseFit& fit);

/// Score series eta_hat(t, l) = e_{a,t} e_{b,t} - v(a, b) for the l-th pair (a, b) of S.
///
/// Holds either the dense n x r matrix (when n * r fits the memory budget) or
/// the residuals needed to regenerate any column block. Both paths produce
/// bitwise identical blocks.
class EtaScores {
 public:
  EtaScores(const Matrix& residuals, const SymMatrix& v, IndexSet s,
            std::size_t memory_budget = kDefaultMemoryBudget);

  /// Wraps an explicit n x r score matrix (no index set attached).
  static EtaScores from_matrix(Matrix eta);

  Index n() const noexcept { return n_; }
  Index r() const noexcept { return r_; }
  bool materialized() const noexcept { return materialized_; }
  bool has_index_set() const noexcept { return s_.r() > 0; }
  const IndexSet& index_set() const noexcept { return s_; }

  /// Columns [begin, end) as a contiguous n x (end - begin) matrix.
  Matrix block(Index begin, Index end) const;
  Vector column(Index l) const;
  /// Dense n x r matrix (materializes on demand if needed).
  Matrix dense() const;

 private:
  EtaScores() = default;
  void fill(Index begin, Index end, double* out) const;

  Index n_ = 0;
  Index r_ = 0;
  bool materialized_ = false;
  Matrix eta_;
  Matrix residuals_;
  Vector offsets_;  // v(a, b) per pair
  IndexSet s_;
};

Matrix eta_scores(const NodewiseFit& fit, const SymMatrix& v, const IndexSet& s);

}  // namespace hdprec
