#include "hdprec/precision.hpp"

namespace hdprec {

SymMatrix estimate_v(const Matrix& residuals, const Matrix& alpha) {
  const Index p = residuals.cols();
  if (alpha.rows() != p || alpha.cols() != p) {
    throw Error(ErrorCode::ShapeError, "alpha must be p x p matching the residual columns");
  }
  if (residuals.rows() < 1) throw Error(ErrorCode::InsufficientData, "no residual rows");
  const double inv_n = 1.0 / static_cast<double>(residuals.rows());

  // Raw residual cross-moments; only the lower triangle is filled and read.
  Matrix cross = Matrix::Zero(p, p);
  cross.selfadjointView<Eigen::Lower>().rankUpdate(residuals.transpose(), inv_n);

  SymMatrix v(p);
  for (Index b = 0; b < p; ++b) {
    for (Index a = b; a < p; ++a) {
      if (a == b) {
        v(a, a) = cross(a, a);
      } else {
        v(a, b) = -(cross(a, b) + alpha(a, b) * cross(b, b) + alpha(b, a) * cross(a, a));
      }
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (!(v(j, j) > 0.0)) {
      throw Error(ErrorCode::DegenerateResiduals,
                  "residuals of node " + std::to_string(j) + " are identically zero");
    }
  }
  return v;
}

SymMatrix estimate_v(const NodewiseFit& fit) { return estimate_v(fit.residuals, fit.alpha); }

SymMatrix estimate_omega(const SymMatrix& v) {
  const Index p = v.dim();
  for (Index j = 0; j < p; ++j) {
    if (!(v(j, j) > 0.0)) {
      throw Error(ErrorCode::DegenerateResiduals,
                  "v(" + std::to_string(j) + "," + std::to_string(j) + ") is not positive");
    }
  }
  SymMatrix omega(p);
  for (Index b = 0; b < p; ++b) {
    for (Index a = b; a < p; ++a) omega(a, b) = v(a, b) / (v(a, a) * v(b, b));
  }
  return omega;
}

PrecisionEstimate estimate_precision(const NodewiseFit& fit) {
  SymMatrix v = estimate_v(fit);
  SymMatrix omega = estimate_omega(v);
  return {std::move(v), std::move(omega)};
}

EtaScores::EtaScores(const Matrix& residuals, const SymMatrix& v, IndexSet s,
                     std::size_t memory_budget)
    : n_(residuals.rows()), r_(s.r()), s_(std::move(s)) {
  if (v.dim() != residuals.cols() || s_.p() != residuals.cols()) {
    throw Error(ErrorCode::ShapeError, "residuals, v and index set disagree on p");
  }
  offsets_.resize(r_);
  for (Index l = 0; l < r_; ++l) offsets_(l) = v(s_[l].first, s_[l].second);
  residuals_ = residuals;
  const auto entries = static_cast<std::size_t>(n_) * static_cast<std::size_t>(r_);
  if (entries <= memory_budget) {
    eta_.resize(n_, r_);
    fill(0, r_, eta_.data());
    materialized_ = true;
  }
}

EtaScores EtaScores::from_matrix(Matrix eta) {
  EtaScores out;
  out.n_ = eta.rows();
  out.r_ = eta.cols();
  out.eta_ = std::move(eta);
  out.materialized_ = true;
  return out;
}

void EtaScores::fill(Index begin, Index end, double* out) const {
  for (Index l = begin; l < end; ++l) {
    const auto& [a, b] = s_[l];
    const double off = offsets_(l);
    const double* ea = residuals_.col(a).data();
    const double* eb = residuals_.col(b).data();
    double* dst = out + (l - begin) * n_;
    for (Index t = 0; t < n_; ++t) dst[t] = ea[t] * eb[t] - off;
  }
}

Matrix EtaScores::block(Index begin, Index end) const {
  if (begin < 0 || end > r_ || begin > end) throw Error(ErrorCode::ShapeError, "eta block out of range");
  if (materialized_) return eta_.middleCols(begin, end - begin);
  Matrix out(n_, end - begin);
  fill(begin, end, out.data());
  return out;
}

Vector EtaScores::column(Index l) const { return block(l, l + 1).col(0); }

Matrix EtaScores::dense() const {
  if (materialized_) return eta_;
  return block(0, r_);
}

Matrix eta_scores(const NodewiseFit& fit, const SymMatrix& v, const IndexSet& s) {
  return EtaScores(fit.residuals, v, s).dense();
}

}  // namespace hdprec
