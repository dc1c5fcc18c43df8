#include "hdprec/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

namespace hdprec {

namespace {

constexpr Index kDrawChunk = 64;
constexpr Index kColumnBlock = 2048;

double resolve_bandwidth(const EtaScores& eta, const BootstrapConfig& cfg) {
  if (cfg.bandwidth) return *cfg.bandwidth;
  return andrews_bandwidth(eta, cfg.kernel, cfg.rng.seed).value;
}

// g = L z for draws [first, first + count), one RNG substream per draw.
Matrix draw_multipliers(const MultiplierFactor& factor, const RngSpec& rng, Index first, Index count) {
  const Index n = factor.factor.rows();
  Matrix z(n, count);
  for (Index b = 0; b < count; ++b) {
    auto engine = rng.engine(static_cast<std::uint64_t>(first + b));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index t = 0; t < n; ++t) z(t, b) = normal(engine);
  }
  if (factor.cholesky) return factor.factor.triangularView<Eigen::Lower>() * z;
  return factor.factor * z;
}

// maxima[s][m] = max_l |scales[s](l) * (E' g_m)(l)|.
std::vector<std::vector<double>> run_draws(const EtaScores& eta, const std::vector<Vector>& scales,
                                           const MultiplierFactor& factor, const RngSpec& rng, Index draws) {
  const Index r = eta.r();
  std::vector<std::vector<double>> maxima(scales.size(), std::vector<double>(static_cast<std::size_t>(draws), 0.0));
  const Index chunks = (draws + kDrawChunk - 1) / kDrawChunk;

#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index c = 0; c < chunks; ++c) {
    const Index first = c * kDrawChunk;
    const Index count = std::min(kDrawChunk, draws - first);
    const Matrix g = draw_multipliers(factor, rng, first, count);
    for (Index begin = 0; begin < r; begin += kColumnBlock) {
      const Index end = std::min(r, begin + kColumnBlock);
      const Matrix e = eta.block(begin, end);
      const Matrix sums = e.transpose() * g;
      for (std::size_t s = 0; s < scales.size(); ++s) {
        const auto scale = scales[s].segment(begin, end - begin);
        for (Index b = 0; b < count; ++b) {
          const double m = (sums.col(b).cwiseAbs().cwiseProduct(scale)).maxCoeff();
          double& slot = maxima[s][static_cast<std::size_t>(first + b)];
          slot = std::max(slot, m);
        }
      }
    }
  }
  return maxima;
}

Vector plain_scale(std::span<const double> h, Index n) {
  const double root_n = std::sqrt(static_cast<double>(n));
  Vector s(static_cast<Index>(h.size()));
  for (Index l = 0; l < s.size(); ++l) s(l) = h[static_cast<std::size_t>(l)] / root_n;
  return s;
}

Vector studentized_scale(std::span<const double> h, std::span<const double> w, Index n) {
  if (w.size() != h.size()) throw Error(ErrorCode::ShapeError, "w_diag length must equal r");
  const double root_n = std::sqrt(static_cast<double>(n));
  Vector s(static_cast<Index>(h.size()));
  for (Index l = 0; l < s.size(); ++l) {
    const double wl = w[static_cast<std::size_t>(l)];
    if (!(wl > 0.0)) throw Error(ErrorCode::MissingScale, "Studentization needs strictly positive w_diag");
    s(l) = h[static_cast<std::size_t>(l)] / (root_n * std::sqrt(wl));
  }
  return s;
}

BootstrapResult make_result(std::vector<double> stats, double bandwidth, bool studentized,
                            std::optional<std::span<const double>> w, const BootstrapConfig& cfg,
                            double clipped_mass) {
  std::sort(stats.begin(), stats.end());
  BootstrapResult out;
  out.stats = std::move(stats);
  out.bandwidth = bandwidth;
  out.studentized = studentized;
  if (studentized && w) out.w_diag = std::vector<double>(w->begin(), w->end());
  out.rng = cfg.rng;
  out.clipped_mass = clipped_mass;
  return out;
}

void check_shapes(const EtaScores& eta, std::span<const double> h) {
  if (eta.r() < 1) throw Error(ErrorCode::ShapeError, "bootstrap needs r >= 1");
  if (static_cast<Index>(h.size()) != eta.r()) throw Error(ErrorCode::ShapeError, "h_diag length must equal r");
}

}  // namespace

void BootstrapConfig::validate() const {
  if (draws < 1) throw Error(ErrorCode::InvalidConfig, "bootstrap draws M must be >= 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw Error(ErrorCode::InvalidConfig, "bandwidth must be positive");
}

Matrix multiplier_covariance(Index n, double bandwidth, const KernelSpec& kernel) {
  const auto w = lag_weights(kernel, bandwidth, n);
  Matrix a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = w[static_cast<std::size_t>(std::abs(i - j))];
  }
  return a;
}

MultiplierFactor gaussian_mult_factor(Index n, double bandwidth, const KernelSpec& kernel, bool allow_cholesky) {
  if (n < 1) throw Error(ErrorCode::InvalidDimension, "multiplier dimension must be >= 1");
  const Matrix a = multiplier_covariance(n, bandwidth, kernel);
  MultiplierFactor out;
  if (allow_cholesky) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      out.factor = llt.matrixL();
      out.cholesky = true;
      return out;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  Vector lambda = eig.eigenvalues();
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < 0.0) {
      out.clipped_mass += -lambda(i);
      lambda(i) = 0.0;
    }
  }
  out.factor = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  return out;
}

BootstrapResult kmb_draws(const EtaScores& eta, std::span<const double> h, const BootstrapConfig& cfg,
                          std::optional<std::span<const double>> w) {
  cfg.validate();
  check_shapes(eta, h);
  if (cfg.studentized && !w) throw Error(ErrorCode::MissingScale, "SKMB requires w_diag");
  const double bandwidth = resolve_bandwidth(eta, cfg);
  const auto factor = gaussian_mult_factor(eta.n(), bandwidth, cfg.kernel);
  std::vector<Vector> scales{cfg.studentized ? studentized_scale(h, *w, eta.n()) : plain_scale(h, eta.n())};
  auto maxima = run_draws(eta, scales, factor, cfg.rng, cfg.draws);
  return make_result(std::move(maxima[0]), bandwidth, cfg.studentized, w, cfg, factor.clipped_mass);
}

DualBootstrap kmb_draws_dual(const EtaScores& eta, std::span<const double> h, std::span<const double> w,
                             const BootstrapConfig& cfg) {
  cfg.validate();
  check_shapes(eta, h);
  const double bandwidth = resolve_bandwidth(eta, cfg);
  const auto factor = gaussian_mult_factor(eta.n(), bandwidth, cfg.kernel);
  std::vector<Vector> scales{plain_scale(h, eta.n()), studentized_scale(h, w, eta.n())};
  auto maxima = run_draws(eta, scales, factor, cfg.rng, cfg.draws);
  DualBootstrap out;
  out.plain = make_result(std::move(maxima[0]), bandwidth, false, std::nullopt, cfg, factor.clipped_mass);
  out.studentized = make_result(std::move(maxima[1]), bandwidth, true, w, cfg, factor.clipped_mass);
  return out;
}

Matrix kmb_draw_vectors(const EtaScores& eta, std::span<const double> h, const BootstrapConfig& cfg,
                        std::optional<std::span<const double>> w) {
  cfg.validate();
  check_shapes(eta, h);
  if (cfg.studentized && !w) throw Error(ErrorCode::MissingScale, "SKMB requires w_diag");
  const double bandwidth = resolve_bandwidth(eta, cfg);
  const auto factor = gaussian_mult_factor(eta.n(), bandwidth, cfg.kernel);
  const Vector scale = cfg.studentized ? studentized_scale(h, *w, eta.n()) : plain_scale(h, eta.n());
  const Matrix e = eta.dense();
  Matrix out(eta.r(), cfg.draws);
  for (Index first = 0; first < cfg.draws; first += kDrawChunk) {
    const Index count = std::min(kDrawChunk, cfg.draws - first);
    const Matrix g = draw_multipliers(factor, cfg.rng, first, count);
    out.middleCols(first, count) = scale.asDiagonal() * (e.transpose() * g);
  }
  return out;
}

double quantile(const BootstrapResult& result, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidLevel, "level must lie in (0, 1)");
  if (result.stats.empty()) throw Error(ErrorCode::ShapeError, "no bootstrap statistics");
  const auto m = static_cast<double>(result.stats.size());
  // The 1e-9 slack absorbs representation error in M * level (e.g. 100 * 0.07).
  auto k = static_cast<Index>(std::ceil(m * level - 1e-9));
  k = std::clamp<Index>(k, 1, static_cast<Index>(result.stats.size()));
  return result.stats[static_cast<std::size_t>(k - 1)];
}

std::vector<Interval> confidence_region(std::span<const double> omega_s, double q, Index n, bool studentized,
                                        std::optional<std::span<const double>> w) {
  if (studentized && (!w || w->size() != omega_s.size())) {
    throw Error(ErrorCode::MissingScale, "Studentized region needs w_diag of length r");
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<Interval> out(omega_s.size());
  for (std::size_t l = 0; l < omega_s.size(); ++l) {
    const double half = studentized ? q * std::sqrt((*w)[l]) / root_n : q / root_n;
    out[l] = {omega_s[l] - half, omega_s[l] + half};
  }
  return out;
}

bool region_contains(const std::vector<Interval>& region, std::span<const double> a) {
  if (region.size() != a.size()) throw Error(ErrorCode::ShapeError, "vector length must equal r");
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (!region[l].contains(a[l])) return false;
  }
  return true;
}

}  // namespace hdprec
