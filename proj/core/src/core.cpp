#include "hdprec/core.hpp"

#include <algorithm>
#include <cmath>

namespace hdprec {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::EmptyBlock: return "EmptyBlock";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DegenerateResiduals: return "DegenerateResiduals";
    case ErrorCode::InvalidLag: return "InvalidLag";
    case ErrorCode::UseDiagonalPath: return "UseDiagonalPath";
    case ErrorCode::MissingScale: return "MissingScale";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidPValue: return "InvalidPValue";
    case ErrorCode::GenerationError: return "GenerationError";
    case ErrorCode::InvalidPrice: return "InvalidPrice";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Dataset::Dataset(Matrix values, bool centered) : values_(std::move(values)), centered_(centered) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorCode::InvalidDimension, "dataset needs at least one row and one column");
  }
  if (centered_) {
    const double tol = 1e-9 * static_cast<double>(values_.rows());
    for (Index j = 0; j < values_.cols(); ++j) {
      if (std::abs(values_.col(j).sum()) > tol) {
        throw Error(ErrorCode::InvalidInput,
                    "column " + std::to_string(j) + " flagged centered but does not sum to 0");
      }
    }
  }
}

Dataset center(const Dataset& data) {
  if (data.n() < 2) {
    throw Error(ErrorCode::InsufficientData, "centering needs n >= 2");
  }
  if (data.centered()) return data;
  Matrix centered = data.values();
  centered.rowwise() -= centered.colwise().mean();
  return Dataset(std::move(centered), true);
}

void require_centered(const Dataset& data, std::string_view who) {
  if (!data.centered()) {
    throw Error(ErrorCode::InvalidInput, std::string(who) + " requires centered data");
  }
}

IndexSet::IndexSet(std::vector<IndexPair> pairs, Index p) : pairs_(std::move(pairs)), p_(p) {
  if (pairs_.empty()) {
    throw Error(ErrorCode::InvalidDimension, "index set must contain at least one pair");
  }
  lookup_.reserve(pairs_.size());
  const auto pu = static_cast<std::uint64_t>(p);
  for (std::size_t l = 0; l < pairs_.size(); ++l) {
    const auto& [a, b] = pairs_[l];
    if (a < 0 || b < 0 || a >= p || b >= p) {
      throw Error(ErrorCode::InvalidDimension, "pair (" + std::to_string(a) + "," +
                                                   std::to_string(b) + ") outside 0.." +
                                                   std::to_string(p - 1));
    }
    lookup_.emplace_back(static_cast<std::uint64_t>(a) * pu + static_cast<std::uint64_t>(b),
                         static_cast<Index>(l));
  }
  std::sort(lookup_.begin(), lookup_.end());
  const auto dup = std::adjacent_find(lookup_.begin(), lookup_.end(),
                                      [](const auto& x, const auto& y) { return x.first == y.first; });
  if (dup != lookup_.end()) {
    throw Error(ErrorCode::InvalidInput, "index set contains a repeated pair");
  }
}

std::optional<Index> IndexSet::position_of(IndexPair pair) const {
  if (pair.first < 0 || pair.second < 0 || pair.first >= p_ || pair.second >= p_) return std::nullopt;
  const auto key = static_cast<std::uint64_t>(pair.first) * static_cast<std::uint64_t>(p_) +
                   static_cast<std::uint64_t>(pair.second);
  const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::pair{key, Index{0}},
                                   [](const auto& x, const auto& y) { return x.first < y.first; });
  if (it == lookup_.end() || it->first != key) return std::nullopt;
  return it->second;
}

IndexSet index_set_all_offdiag(Index p) {
  if (p < 2) throw Error(ErrorCode::InvalidDimension, "offdiag index set needs p >= 2");
  std::vector<IndexPair> pairs;
  pairs.reserve(static_cast<std::size_t>(p * (p - 1)));
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b) {
      if (a != b) pairs.push_back({a, b});
    }
  }
  return IndexSet(std::move(pairs), p);
}

IndexSet index_set_from_blocks(const std::vector<std::vector<Index>>& groups, std::size_t h1,
                               std::size_t h2, Index p) {
  if (h1 >= groups.size() || h2 >= groups.size()) {
    throw Error(ErrorCode::InvalidDimension, "block index out of range");
  }
  std::vector<Index> seen;
  for (const auto& g : groups) seen.insert(seen.end(), g.begin(), g.end());
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(ErrorCode::InvalidInput, "groups must be disjoint");
  }
  const auto& left = groups[h1];
  const auto& right = groups[h2];
  if (left.empty() || right.empty()) {
    throw Error(ErrorCode::EmptyBlock, "block " + std::to_string(left.empty() ? h1 : h2) + " is empty");
  }
  std::vector<IndexPair> pairs;
  pairs.reserve(left.size() * right.size());
  for (Index a : left) {
    for (Index b : right) {
      if (h1 == h2 && a == b) continue;
      pairs.push_back({a, b});
    }
  }
  if (pairs.empty()) {
    throw Error(ErrorCode::EmptyBlock, "within-block set of a singleton group is empty");
  }
  return IndexSet(std::move(pairs), p);
}

IndexSet index_set_band_outside(Index p, Index k) {
  if (p < 2) throw Error(ErrorCode::InvalidDimension, "band index set needs p >= 2");
  if (k < 0) throw Error(ErrorCode::InvalidInput, "band width must be non-negative");
  std::vector<IndexPair> pairs;
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b) {
      if (std::abs(a - b) > k) pairs.push_back({a, b});
    }
  }
  if (pairs.empty()) throw Error(ErrorCode::InvalidDimension, "band leaves no pairs outside it");
  return IndexSet(std::move(pairs), p);
}

SymMatrix::SymMatrix(Index dim, double fill)
    : dim_(dim), data_(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim + 1) / 2, fill) {
  if (dim < 0) throw Error(ErrorCode::InvalidDimension, "negative matrix dimension");
}

SymMatrix SymMatrix::from_dense(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::ShapeError, "matrix is not square");
  SymMatrix out(m.rows());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = j; i < m.rows(); ++i) out(i, j) = m(i, j);
  }
  return out;
}

SymMatrix SymMatrix::identity(Index dim) {
  SymMatrix out(dim);
  for (Index i = 0; i < dim; ++i) out(i, i) = 1.0;
  return out;
}

Matrix SymMatrix::to_dense() const {
  Matrix m(dim_, dim_);
  for (Index j = 0; j < dim_; ++j) {
    for (Index i = 0; i < dim_; ++i) m(i, j) = (*this)(i, j);
  }
  return m;
}

Vector SymMatrix::diagonal() const {
  Vector d(dim_);
  for (Index i = 0; i < dim_; ++i) d(i) = (*this)(i, i);
  return d;
}

Vector SymMatrix::extract(const IndexSet& s) const {
  if (s.p() != dim_) throw Error(ErrorCode::ShapeError, "index set built for a different p");
  Vector out(s.r());
  for (Index l = 0; l < s.r(); ++l) out(l) = (*this)(s[l].first, s[l].second);
  return out;
}

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

RngSpec RngSpec::child(std::string_view label) const {
  return RngSpec{seed, stream + "/" + std::string(label)};
}

RngSpec RngSpec::child(std::string_view label, std::uint64_t index) const {
  return RngSpec{seed, stream + "/" + std::string(label) + "#" + std::to_string(index)};
}

std::mt19937_64 RngSpec::engine(std::uint64_t index) const {
  const std::uint64_t h = stable_hash(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace hdprec
