#pragma once

// Simulation designs and the two-stage Monte Carlo coverage harness.
//
// Structure A: sigma*_{ij} = 0.5^|i-j|. Structure B: 5 x 5 diagonal blocks with
// off-diagonal 0.5. Identity: Sigma = I. In every case Sigma is rescaled so that
// Omega = Sigma^-1 has a unit diagonal.

#include <optional>
#include <string>
#include <vector>

#include "hdprec/core.hpp"
#include "hdprec/inference.hpp"

namespace hdprec {

enum class Structure { A, B, Identity };

const char* to_string(Structure s) noexcept;
std::optional<Structure> parse_structure(std::string_view text);

struct DgpSpec {
  Structure structure = Structure::A;
  Index p = 50;
  double rho = 0.0;
  Index n = 150;
  RngSpec rng;

  void validate() const;
};

struct SigmaPair {
  SymMatrix sigma;
  SymMatrix omega;
};

SigmaPair build_sigma(Structure structure, Index p);

/// Pairs (j1 != j2) with |omega(j1, j2)| <= tol, row-major.
IndexSet zero_index_set(const SymMatrix& omega, double tol = 1e-10);

/// Draws y_1 = e_1, y_t = rho y_{t-1} + sqrt(1 - rho^2) e_t with e_t ~ N(0, Sigma).
/// Keeps the Cholesky factor of Sigma so repeated draws skip the factorization.
class Generator {
 public:
  Generator(Structure structure, Index p);

  const SigmaPair& truth() const noexcept { return truth_; }
  Dataset draw(Index n, double rho, const RngSpec& rng) const;

 private:
  SigmaPair truth_;
  Matrix chol_;  // lower factor
};

Dataset generate(const DgpSpec& dgp);

enum class IndexChoice { Zeros, Offdiag };

const char* to_string(IndexChoice c) noexcept;
IndexSet index_set_for(IndexChoice choice, const SymMatrix& omega);

struct CoverageConfig {
  std::vector<IndexChoice> choices{IndexChoice::Zeros, IndexChoice::Offdiag};
  std::vector<double> levels{0.925, 0.95, 0.975};
  Index replicates = 500;
  Index benchmark_reps = 1000;
  Index draws = 1000;
  PipelineConfig pipeline;
  std::optional<double> force_quantile;  // test hook: replaces every bootstrap quantile

  void validate() const;
};

struct CoverageCell {
  IndexChoice choice = IndexChoice::Zeros;
  bool studentized = false;
  double level = 0.95;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

struct CoverageReport {
  DgpSpec dgp;
  double lambda_scale = 0.5;
  Index replicates = 0;
  Index failed = 0;
  Index benchmark_reps = 0;
  Index benchmark_failed = 0;
  Index draws = 0;
  std::vector<CoverageCell> cells;
  std::vector<double> median_w;   // per choice: median over replicates of median_l w_l
  std::vector<double> mean_bandwidth;  // per choice
  double runtime_seconds = 0.0;

  const CoverageCell* find(IndexChoice choice, bool studentized, double level) const;
};

CoverageReport coverage_experiment(const DgpSpec& dgp, const CoverageConfig& cfg);

/// Tables layout: one row per structure x rho x level, KMB/SKMB x index set columns.
std::string coverage_csv(const std::vector<CoverageReport>& reports);

}  // namespace hdprec
