#include "hdprec/longrun.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <omp.h>

namespace hdprec {

namespace {

constexpr double kRhoClip = 0.97;

// sum_k w_k (1/n)(sum_t a_t b_{t-k} + sum_t b_t a_{t-k}), k = 0 counted once.
// For a == b the two inner sums coincide and are computed once.
double weighted_cross(const double* a, const double* b, Index n, const std::vector<double>& w) {
  double acc = 0.0;
  for (Index t = 0; t < n; ++t) acc += a[t] * b[t];
  acc *= w[0];
  for (Index k = 1; k < n; ++k) {
    const double wk = w[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    double s1 = 0.0;
    for (Index t = k; t < n; ++t) s1 += a[t] * b[t - k];
    double s2 = s1;
    if (a != b) {
      s2 = 0.0;
      for (Index t = k; t < n; ++t) s2 += b[t] * a[t - k];
    }
    acc += wk * (s1 + s2);
  }
  return acc / static_cast<double>(n);
}

void check_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::InvalidInput, "bandwidth must be positive and finite");
  }
}

}  // namespace

const char* to_string(KernelKind kind) noexcept {
  return kind == KernelKind::QuadraticSpectral ? "qs" : "bartlett";
}

double kernel_eval(const KernelSpec& spec, double u) {
  if (spec.kind == KernelKind::Bartlett) return std::max(1.0 - std::abs(u), 0.0);
  if (u == 0.0) return 1.0;
  // The closed form cancels near 0; there K = 1 - x^2/10 + x^4/280 - x^6/15120 + O(x^8).
  const double x = 6.0 * std::numbers::pi * u / 5.0;
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return 1.0 - x2 / 10.0 + x2 * x2 / 280.0 - x2 * x2 * x2 / 15120.0;
  }
  return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * u * u) * (std::sin(x) / x - std::cos(x));
}

std::vector<double> lag_weights(const KernelSpec& spec, double bandwidth, Index n) {
  check_bandwidth(bandwidth);
  std::vector<double> w(static_cast<std::size_t>(std::max<Index>(n, 1)), 0.0);
  for (Index k = 0; k < n; ++k) {
    const double value = kernel_eval(spec, static_cast<double>(k) / bandwidth);
    w[static_cast<std::size_t>(k)] = std::abs(value) < spec.truncation_eps ? 0.0 : value;
  }
  return w;
}

Ar1Fit fit_ar1(std::span<const double> series) {
  Ar1Fit fit;
  const auto n = static_cast<Index>(series.size());
  if (n < 2) {
    fit.degenerate = true;
    return fit;
  }
  if (std::all_of(series.begin(), series.end(), [&](double x) { return x == series[0]; })) {
    fit.degenerate = true;
    return fit;
  }
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  double num = 0.0;
  double den = 0.0;
  for (Index t = 1; t < n; ++t) {
    const double cur = series[static_cast<std::size_t>(t)] - mean;
    const double prev = series[static_cast<std::size_t>(t - 1)] - mean;
    num += cur * prev;
    den += prev * prev;
  }
  if (!(den > 0.0)) {
    fit.degenerate = true;
    return fit;
  }
  fit.rho = std::clamp(num / den, -kRhoClip, kRhoClip);
  double ss = 0.0;
  for (Index t = 1; t < n; ++t) {
    const double e = (series[static_cast<std::size_t>(t)] - mean) -
                     fit.rho * (series[static_cast<std::size_t>(t - 1)] - mean);
    ss += e * e;
  }
  fit.innovation_var = ss / static_cast<double>(n - 1);
  if (!(fit.innovation_var > 0.0)) fit.degenerate = true;
  return fit;
}

std::optional<double> plugin_bandwidth(std::span<const Ar1Fit> fits, Index n, const KernelSpec& spec) {
  double num = 0.0;
  double den = 0.0;
  bool any = false;
  for (const auto& f : fits) {
    if (f.degenerate) continue;
    any = true;
    const double rho = f.rho;
    const double s4 = f.innovation_var * f.innovation_var;
    const double one_minus = 1.0 - rho;
    den += s4 / std::pow(one_minus, 4);
    if (spec.kind == KernelKind::QuadraticSpectral) {
      num += 4.0 * rho * rho * s4 / std::pow(one_minus, 8);
    } else {
      num += 4.0 * rho * rho * s4 / (std::pow(one_minus, 6) * std::pow(1.0 + rho, 2));
    }
  }
  if (!any || !(den > 0.0)) return std::nullopt;
  const double alpha = num / den;
  const auto nd = static_cast<double>(n);
  const double raw = spec.kind == KernelKind::QuadraticSpectral ? 1.3221 * std::pow(alpha * nd, 0.2)
                                                                : 1.1447 * std::pow(alpha * nd, 1.0 / 3.0);
  const double cap = 3.0 * std::pow(nd, 0.2);
  return std::clamp(raw, 1.0, cap);
}

BandwidthEstimate andrews_bandwidth(const EtaScores& eta, const KernelSpec& spec,
                                    std::uint64_t subsample_seed, Index max_columns) {
  if (eta.n() < 8) throw Error(ErrorCode::InsufficientData, "bandwidth selection needs n >= 8");
  const Index r = eta.r();
  std::vector<Index> columns(static_cast<std::size_t>(r));
  for (Index l = 0; l < r; ++l) columns[static_cast<std::size_t>(l)] = l;
  if (max_columns > 0 && r > max_columns) {
    std::vector<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(max_columns));
    auto engine = RngSpec{subsample_seed, "bandwidth-subsample"}.engine();
    std::sample(columns.begin(), columns.end(), std::back_inserter(chosen), max_columns, engine);
    std::sort(chosen.begin(), chosen.end());
    columns = std::move(chosen);
  }

  std::vector<Ar1Fit> fits(columns.size());
  const auto count = static_cast<Index>(columns.size());
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (Index i = 0; i < count; ++i) {
    const Vector col = eta.column(columns[static_cast<std::size_t>(i)]);
    fits[static_cast<std::size_t>(i)] = fit_ar1(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }

  BandwidthEstimate est;
  est.columns_used = count;
  if (auto bw = plugin_bandwidth(fits, eta.n(), spec)) {
    est.value = *bw;
  } else {
    est.value = 1.0;
    est.fallback = true;
  }
  return est;
}

Matrix gamma_hat(const Matrix& eta, Index lag) {
  const Index n = eta.rows();
  if (std::abs(lag) >= n) throw Error(ErrorCode::InvalidLag, "|k| must be at most n - 1");
  const Index k = std::abs(lag);
  Matrix g = eta.bottomRows(n - k).transpose() * eta.topRows(n - k) / static_cast<double>(n);
  if (lag < 0) return g.transpose();
  return g;
}

SymMatrix xi_hat(const EtaScores& eta, double bandwidth, const KernelSpec& spec, std::size_t memory_budget) {
  const Index r = eta.r();
  const Index n = eta.n();
  if (static_cast<std::size_t>(r) * static_cast<std::size_t>(r) > memory_budget) {
    throw Error(ErrorCode::UseDiagonalPath, "r x r long-run matrix exceeds the memory budget");
  }
  const auto w = lag_weights(spec, bandwidth, n);
  const Matrix e = eta.dense();
  SymMatrix xi(r);
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index b = 0; b < r; ++b) {
    for (Index a = b; a < r; ++a) xi(a, b) = weighted_cross(e.col(a).data(), e.col(b).data(), n, w);
  }
  return xi;
}

Vector h_diag(const SymMatrix& v, const IndexSet& s) {
  if (s.p() != v.dim()) throw Error(ErrorCode::ShapeError, "index set built for a different p");
  Vector h(s.r());
  for (Index l = 0; l < s.r(); ++l) {
    const double d = v(s[l].first, s[l].first) * v(s[l].second, s[l].second);
    if (!(d > 0.0)) throw Error(ErrorCode::DegenerateResiduals, "non-positive diagonal in v");
    h(l) = 1.0 / d;
  }
  return h;
}

LongRunDiag w_diag(const EtaScores& eta, std::span<const double> h, double bandwidth, const KernelSpec& spec) {
  const Index r = eta.r();
  const Index n = eta.n();
  if (static_cast<Index>(h.size()) != r) throw Error(ErrorCode::ShapeError, "h_diag length must equal r");
  const auto w = lag_weights(spec, bandwidth, n);

  LongRunDiag out;
  out.w.resize(r);
  std::vector<char> floored(static_cast<std::size_t>(r), 0);
  constexpr Index kBlock = 1024;
  const Index blocks = (r + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index bi = 0; bi < blocks; ++bi) {
    const Index begin = bi * kBlock;
    const Index end = std::min(r, begin + kBlock);
    const Matrix e = eta.block(begin, end);
    for (Index c = 0; c < end - begin; ++c) {
      const double* col = e.col(c).data();
      double lr = weighted_cross(col, col, n, w);
      if (!(lr > 0.0)) {
        const double gamma0 = e.col(c).squaredNorm() / static_cast<double>(n);
        lr = gamma0 > 0.0 ? kVarianceFloor * gamma0 : kVarianceFloor;
        floored[static_cast<std::size_t>(begin + c)] = 1;
      }
      const double hl = h[static_cast<std::size_t>(begin + c)];
      out.w(begin + c) = sandwich(hl, lr, hl);
    }
  }
  for (Index l = 0; l < r; ++l) {
    if (floored[static_cast<std::size_t>(l)]) out.floored.push_back(l);
  }
  return out;
}

LongRunEstimate estimate_long_run(const EtaScores& eta, const SymMatrix& v, const KernelSpec& spec,
                                  std::optional<double> bandwidth, bool materialize_xi,
                                  std::uint64_t subsample_seed) {
  if (!eta.has_index_set()) throw Error(ErrorCode::InvalidInput, "scores carry no index set");
  LongRunEstimate est;
  est.kernel = spec;
  if (bandwidth) {
    check_bandwidth(*bandwidth);
    est.bandwidth = *bandwidth;
  } else {
    const auto bw = andrews_bandwidth(eta, spec, subsample_seed);
    est.bandwidth = bw.value;
    est.bandwidth_fallback = bw.fallback;
  }
  est.h_diag = h_diag(v, eta.index_set());
  auto diag = w_diag(eta, std::span<const double>(est.h_diag.data(), static_cast<std::size_t>(est.h_diag.size())),
                     est.bandwidth, spec);
  est.w_diag = std::move(diag.w);
  est.floored = std::move(diag.floored);
  if (materialize_xi) est.xi_full = xi_hat(eta, est.bandwidth, spec);
  return est;
}

}  // namespace hdprec
