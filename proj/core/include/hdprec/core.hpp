#pragma once

// Shared data model: datasets, index sets, symmetric matrices, RNG streams
// and the library's error type.

#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hdprec {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  InsufficientData,
  InvalidDimension,
  EmptyBlock,
  DegenerateColumn,
  InvalidInput,
  DegenerateResiduals,
  InvalidLag,
  UseDiagonalPath,
  MissingScale,
  InvalidLevel,
  ShapeError,
  InvalidPValue,
  GenerationError,
  InvalidPrice,
  MissingValue,
  InvalidConfig,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// n x p observation matrix; row t is y_t, column j is variable j.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix values, bool centered = false);

  const Matrix& values() const noexcept { return values_; }
  Index n() const noexcept { return values_.rows(); }
  Index p() const noexcept { return values_.cols(); }
  bool centered() const noexcept { return centered_; }

 private:
  Matrix values_;
  bool centered_ = false;
};

/// Subtracts the column means. Inputs already flagged as centered are
/// returned unchanged.
Dataset center(const Dataset& data);

/// Throws InvalidInput unless the dataset carries the centered flag.
void require_centered(const Dataset& data, std::string_view who);

struct IndexPair {
  Index first = 0;
  Index second = 0;

  bool is_diagonal() const noexcept { return first == second; }
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

/// Ordered list of (j1, j2) pairs, 0-based. The order is the bijection
/// between positions 0..r-1 and the pairs.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<IndexPair> pairs, Index p);

  Index r() const noexcept { return static_cast<Index>(pairs_.size()); }
  Index p() const noexcept { return p_; }
  const std::vector<IndexPair>& pairs() const noexcept { return pairs_; }
  const IndexPair& operator[](Index l) const { return pairs_[static_cast<std::size_t>(l)]; }

  std::optional<Index> position_of(IndexPair pair) const;

 private:
  std::vector<IndexPair> pairs_;
  Index p_ = 0;
  // (j1 * p + j2, position), sorted by key.
  std::vector<std::pair<std::uint64_t, Index>> lookup_;
};

/// All (j1, j2) with j1 != j2 in row-major order; r = p(p-1).
IndexSet index_set_all_offdiag(Index p);

/// I_{h1} x I_{h2} in row-major order, without diagonal pairs when h1 == h2.
IndexSet index_set_from_blocks(const std::vector<std::vector<Index>>& groups,
                               std::size_t h1, std::size_t h2, Index p);

/// All (j1, j2) with |j1 - j2| > k, row-major.
IndexSet index_set_band_outside(Index p, Index k);

/// Symmetric matrix with packed lower-triangular storage, so that
/// (i, j) and (j, i) address the same element.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Index dim, double fill = 0.0);

  static SymMatrix from_dense(const Matrix& m);  // reads the lower triangle
  static SymMatrix identity(Index dim);

  Index dim() const noexcept { return dim_; }
  double operator()(Index i, Index j) const noexcept { return data_[offset(i, j)]; }
  double& operator()(Index i, Index j) noexcept { return data_[offset(i, j)]; }

  Matrix to_dense() const;
  Vector diagonal() const;
  /// Entries at the pairs of S, in S order.
  Vector extract(const IndexSet& s) const;

 private:
  static std::size_t offset(Index i, Index j) noexcept {
    if (i < j) std::swap(i, j);
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(i + 1) / 2 +
           static_cast<std::size_t>(j);
  }

  Index dim_ = 0;
  std::vector<double> data_;
};

/// Seed plus stream label. Engines for distinct (seed, stream, index) triples
/// are seeded independently, so a draw's randomness does not depend on which
/// thread produces it or in what order.
struct RngSpec {
  std::uint64_t seed = 0;
  std::string stream = "default";

  RngSpec child(std::string_view label) const;
  RngSpec child(std::string_view label, std::uint64_t index) const;
  std::mt19937_64 engine(std::uint64_t index = 0) const;
};

/// Stable 64-bit FNV-1a hash, used to key RNG substreams by label.
std::uint64_t stable_hash(std::string_view text) noexcept;

}  // namespace hdprec
