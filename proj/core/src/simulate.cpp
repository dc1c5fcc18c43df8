#include "hdprec/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <omp.h>

namespace hdprec {

namespace {

constexpr Index kBlockSize = 5;

Matrix sigma_star(Structure structure, Index p) {
  Matrix s = Matrix::Identity(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      switch (structure) {
        case Structure::A:
          s(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
          break;
        case Structure::B:
          if (i / kBlockSize == j / kBlockSize) s(i, j) = 0.5;
          break;
        case Structure::Identity:
          break;
      }
    }
  }
  return s;
}

Matrix inverse_spd(const Matrix& m) {
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::GenerationError, "covariance is not positive definite");
  Matrix inv = ldlt.solve(Matrix::Identity(m.rows(), m.cols()));
  return (inv + inv.transpose()) / 2.0;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

double fraction_at_most(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), q);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Plain and Studentized sqrt(n)|omega_hat_S - omega_S|_inf for one fitted sample.
struct ErrorStats {
  double plain = 0.0;
  double studentized = 0.0;
};

ErrorStats error_stats(const RegionData& region, const Vector& truth_s, Index n) {
  const auto truth = as_span(truth_s);
  return {structure_statistic(as_span(region.omega_s), truth, n),
          structure_statistic(as_span(region.omega_s), truth, n, region.w())};
}

PipelineConfig replicate_pipeline(const PipelineConfig& base, const RngSpec& rng) {
  PipelineConfig out = base;
  out.seed = rng.child("bandwidth").engine()();
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

const char* to_string(Structure s) noexcept {
  switch (s) {
    case Structure::A:
      return "A";
    case Structure::B:
      return "B";
    case Structure::Identity:
      return "I";
  }
  return "?";
}

std::optional<Structure> parse_structure(std::string_view text) {
  if (text == "A" || text == "a") return Structure::A;
  if (text == "B" || text == "b") return Structure::B;
  if (text == "I" || text == "i" || text == "identity") return Structure::Identity;
  return std::nullopt;
}

const char* to_string(IndexChoice c) noexcept { return c == IndexChoice::Zeros ? "zeros" : "offdiag"; }

void DgpSpec::validate() const {
  if (p < 1) throw Error(ErrorCode::InvalidDimension, "p must be >= 1");
  if (n < 1) throw Error(ErrorCode::InvalidDimension, "n must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must lie in [0, 1)");
  if (structure == Structure::B && p % kBlockSize != 0) {
    throw Error(ErrorCode::InvalidDimension, "structure B needs p divisible by 5");
  }
}

SigmaPair build_sigma(Structure structure, Index p) {
  if (p < 1) throw Error(ErrorCode::InvalidDimension, "p must be >= 1");
  if (structure == Structure::B && p % kBlockSize != 0) {
    throw Error(ErrorCode::InvalidDimension, "structure B needs p divisible by 5");
  }
  const Matrix star = sigma_star(structure, p);
  const Vector d = inverse_spd(star).diagonal().cwiseSqrt();
  Matrix sigma = d.asDiagonal() * star * d.asDiagonal();
  sigma = (sigma + sigma.transpose()) / 2.0;
  return {SymMatrix::from_dense(sigma), SymMatrix::from_dense(inverse_spd(sigma))};
}

IndexSet zero_index_set(const SymMatrix& omega, double tol) {
  const Index p = omega.dim();
  std::vector<IndexPair> pairs;
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b) {
      if (a != b && std::abs(omega(a, b)) <= tol) pairs.push_back({a, b});
    }
  }
  if (pairs.empty()) throw Error(ErrorCode::InvalidInput, "precision matrix has no zero off-diagonal entries");
  return IndexSet(std::move(pairs), p);
}

IndexSet index_set_for(IndexChoice choice, const SymMatrix& omega) {
  return choice == IndexChoice::Zeros ? zero_index_set(omega) : index_set_all_offdiag(omega.dim());
}

Generator::Generator(Structure structure, Index p) : truth_(build_sigma(structure, p)) {
  Eigen::LLT<Matrix> llt(truth_.sigma.to_dense());
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::GenerationError, "Sigma is not positive definite");
  chol_ = llt.matrixL();
}

Dataset Generator::draw(Index n, double rho, const RngSpec& rng) const {
  if (n < 1) throw Error(ErrorCode::InvalidDimension, "n must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must lie in [0, 1)");
  const Index p = chol_.rows();
  Matrix z(p, n);
  auto engine = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index t = 0; t < n; ++t) {
    for (Index j = 0; j < p; ++j) z(j, t) = normal(engine);
  }
  const Matrix eps = chol_.triangularView<Eigen::Lower>() * z;
  const double innov = std::sqrt(1.0 - rho * rho);
  Matrix y(n, p);
  y.row(0) = eps.col(0).transpose();
  for (Index t = 1; t < n; ++t) y.row(t) = rho * y.row(t - 1) + innov * eps.col(t).transpose();
  return Dataset(std::move(y));
}

Dataset generate(const DgpSpec& dgp) {
  dgp.validate();
  return Generator(dgp.structure, dgp.p).draw(dgp.n, dgp.rho, dgp.rng);
}

void CoverageConfig::validate() const {
  if (replicates < 1 || benchmark_reps < 1) throw Error(ErrorCode::InvalidConfig, "R and R0 must be >= 1");
  if (draws < 1) throw Error(ErrorCode::InvalidConfig, "bootstrap draws M must be >= 1");
  if (choices.empty()) throw Error(ErrorCode::InvalidConfig, "no index-set choice given");
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidLevel, "levels must lie in (0, 1)");
  }
  pipeline.lasso.validate();
}

const CoverageCell* CoverageReport::find(IndexChoice choice, bool studentized, double level) const {
  for (const auto& c : cells) {
    if (c.choice == choice && c.studentized == studentized && std::abs(c.level - level) < 1e-12) return &c;
  }
  return nullptr;
}

CoverageReport coverage_experiment(const DgpSpec& dgp, const CoverageConfig& cfg) {
  dgp.validate();
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Generator gen(dgp.structure, dgp.p);
  const Index n = dgp.n;
  const std::size_t nc = cfg.choices.size();
  const std::size_t nl = cfg.levels.size();

  std::vector<IndexSet> sets;
  std::vector<Vector> truths;
  for (auto choice : cfg.choices) {
    sets.push_back(index_set_for(choice, gen.truth().omega));
    truths.push_back(gen.truth().omega.extract(sets.back()));
  }

  // Stage 1: benchmark distribution of the estimation error.
  const Index r0 = cfg.benchmark_reps;
  std::vector<std::vector<ErrorStats>> bench(static_cast<std::size_t>(r0), std::vector<ErrorStats>(nc));
  std::vector<char> bench_ok(static_cast<std::size_t>(r0), 0);
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index i = 0; i < r0; ++i) {
    const RngSpec rng = dgp.rng.child("benchmark", static_cast<std::uint64_t>(i));
    try {
      const auto pipe = replicate_pipeline(cfg.pipeline, rng);
      const auto fitted = fit_precision(gen.draw(n, dgp.rho, rng.child("data")), pipe.lasso);
      for (std::size_t c = 0; c < nc; ++c) {
        const auto region = prepare_region(fitted, sets[c], pipe);
        bench[static_cast<std::size_t>(i)][c] = error_stats(region, truths[c], n);
      }
      bench_ok[static_cast<std::size_t>(i)] = 1;
    } catch (const std::exception&) {
    }
  }
  CoverageReport report;
  std::vector<std::vector<double>> bench_plain(nc);
  std::vector<std::vector<double>> bench_stud(nc);
  for (Index i = 0; i < r0; ++i) {
    if (!bench_ok[static_cast<std::size_t>(i)]) {
      ++report.benchmark_failed;
      continue;
    }
    for (std::size_t c = 0; c < nc; ++c) {
      bench_plain[c].push_back(bench[static_cast<std::size_t>(i)][c].plain);
      bench_stud[c].push_back(bench[static_cast<std::size_t>(i)][c].studentized);
    }
  }
  if (report.benchmark_failed == r0) throw Error(ErrorCode::InvalidInput, "every benchmark replicate failed");
  for (std::size_t c = 0; c < nc; ++c) {
    std::sort(bench_plain[c].begin(), bench_plain[c].end());
    std::sort(bench_stud[c].begin(), bench_stud[c].end());
  }

  // Stage 2: bootstrap quantiles per replicate, scored against the benchmark.
  const Index reps = cfg.replicates;
  // coverage[i][(c * 2 + studentized) * nl + level]
  std::vector<std::vector<double>> coverage(static_cast<std::size_t>(reps), std::vector<double>(nc * 2 * nl, 0.0));
  std::vector<std::vector<double>> rep_median_w(static_cast<std::size_t>(reps), std::vector<double>(nc, 0.0));
  std::vector<std::vector<double>> rep_bandwidth(static_cast<std::size_t>(reps), std::vector<double>(nc, 0.0));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (Index i = 0; i < reps; ++i) {
    const RngSpec rng = dgp.rng.child("replicate", static_cast<std::uint64_t>(i));
    const auto slot = static_cast<std::size_t>(i);
    try {
      const auto pipe = replicate_pipeline(cfg.pipeline, rng);
      const auto fitted = fit_precision(gen.draw(n, dgp.rho, rng.child("data")), pipe.lasso);
      for (std::size_t c = 0; c < nc; ++c) {
        const auto region = prepare_region(fitted, sets[c], pipe);
        rep_median_w[slot][c] = median(std::vector<double>(region.w().begin(), region.w().end()));
        rep_bandwidth[slot][c] = region.longrun.bandwidth;
        std::optional<DualBootstrap> boot;
        if (!cfg.force_quantile) {
          BootstrapConfig bc;
          bc.draws = cfg.draws;
          bc.kernel = pipe.kernel;
          bc.bandwidth = region.longrun.bandwidth;
          bc.rng = rng.child("bootstrap", c);
          boot = kmb_draws_dual(region.eta, region.h(), region.w(), bc);
        }
        for (int s = 0; s < 2; ++s) {
          const auto& benchmark = s == 0 ? bench_plain[c] : bench_stud[c];
          for (std::size_t l = 0; l < nl; ++l) {
            const double q = cfg.force_quantile ? *cfg.force_quantile
                                                : quantile(s == 0 ? boot->plain : boot->studentized, cfg.levels[l]);
            coverage[slot][(c * 2 + static_cast<std::size_t>(s)) * nl + l] = fraction_at_most(benchmark, q);
          }
        }
      }
      ok[slot] = 1;
    } catch (const std::exception&) {
    }
  }

  report.dgp = dgp;
  report.lambda_scale = cfg.pipeline.lasso.lambda_scale;
  report.replicates = reps;
  report.benchmark_reps = r0;
  report.draws = cfg.draws;
  Index good = 0;
  for (Index i = 0; i < reps; ++i) good += ok[static_cast<std::size_t>(i)] ? 1 : 0;
  report.failed = reps - good;
  if (good == 0) throw Error(ErrorCode::InvalidInput, "every coverage replicate failed");

  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> meds;
    double bw = 0.0;
    for (Index i = 0; i < reps; ++i) {
      if (!ok[static_cast<std::size_t>(i)]) continue;
      meds.push_back(rep_median_w[static_cast<std::size_t>(i)][c]);
      bw += rep_bandwidth[static_cast<std::size_t>(i)][c];
    }
    report.median_w.push_back(median(meds));
    report.mean_bandwidth.push_back(bw / static_cast<double>(good));
    for (int s = 0; s < 2; ++s) {
      for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t k = (c * 2 + static_cast<std::size_t>(s)) * nl + l;
        double sum = 0.0;
        for (Index i = 0; i < reps; ++i) {
          if (ok[static_cast<std::size_t>(i)]) sum += coverage[static_cast<std::size_t>(i)][k];
        }
        const double mean = sum / static_cast<double>(good);
        double ss = 0.0;
        for (Index i = 0; i < reps; ++i) {
          if (!ok[static_cast<std::size_t>(i)]) continue;
          const double d = coverage[static_cast<std::size_t>(i)][k] - mean;
          ss += d * d;
        }
        const double sd = good > 1 ? std::sqrt(ss / static_cast<double>(good - 1)) : 0.0;
        report.cells.push_back({cfg.choices[c], s == 1, cfg.levels[l], mean, sd,
                                sd / std::sqrt(static_cast<double>(good))});
      }
    }
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string coverage_csv(const std::vector<CoverageReport>& reports) {
  std::ostringstream out;
  out << "structure,p,n,rho,lambda_scale,level";
  const IndexChoice all_choices[] = {IndexChoice::Zeros, IndexChoice::Offdiag};
  for (const char* method : {"kmb", "skmb"}) {
    for (auto choice : all_choices) {
      const std::string col = std::string(method) + "_" + to_string(choice);
      out << ',' << col << ',' << col << "_sd";
    }
  }
  out << ",replicates,failed,benchmark_reps,draws\n";
  for (const auto& rep : reports) {
    std::vector<double> levels;
    for (const auto& cell : rep.cells) {
      if (std::find(levels.begin(), levels.end(), cell.level) == levels.end()) levels.push_back(cell.level);
    }
    for (double level : levels) {
      out << to_string(rep.dgp.structure) << ',' << rep.dgp.p << ',' << rep.dgp.n << ',' << fmt(rep.dgp.rho) << ','
          << fmt(rep.lambda_scale) << ',' << fmt(level);
      for (bool stud : {false, true}) {
        for (auto choice : all_choices) {
          if (const auto* cell = rep.find(choice, stud, level)) {
            out << ',' << fmt(cell->mean) << ',' << fmt(cell->sd);
          } else {
            out << ",,";
          }
        }
      }
      out << ',' << rep.replicates << ',' << rep.failed << ',' << rep.benchmark_reps << ',' << rep.draws << '\n';
    }
  }
  return out.str();
}

}  // namespace hdprec
