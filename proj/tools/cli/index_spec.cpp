#include "index_spec.hpp"

#include <cmath>
#include <sstream>

#include "hdprec/io.hpp"

namespace hdprec::cli {

namespace {

std::vector<std::string> tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

[[noreturn]] void bad_spec(const std::string& spec, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "--set '" + spec + "': " + why);
}

Index parse_count(const std::string& spec, const std::string& token) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used != token.size() || v < 0) bad_spec(spec, "expected a non-negative integer, got '" + token + "'");
    return static_cast<Index>(v);
  } catch (const std::logic_error&) {
    bad_spec(spec, "expected a non-negative integer, got '" + token + "'");
  }
}

IndexSet zeros_of(const std::string& spec, const std::string& file, Index p) {
  const Matrix m = io::read_matrix(file, false);
  if (m.rows() != p || m.cols() != p) {
    bad_spec(spec, file + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", data has p = " +
                       std::to_string(p));
  }
  std::vector<IndexPair> pairs;
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b) {
      if (a != b && std::abs(m(a, b)) <= 1e-10) pairs.push_back({a, b});
    }
  }
  if (pairs.empty()) bad_spec(spec, file + " has no zero off-diagonal entries");
  return IndexSet(std::move(pairs), p);
}

IndexSet pairs_file(const std::string& spec, const std::string& file, Index p) {
  const auto table = io::read_csv(file, false);
  std::vector<IndexPair> pairs;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() < 2) bad_spec(spec, file + " row " + std::to_string(i + 1) + " needs j1,j2");
    long long a = 0;
    long long b = 0;
    try {
      a = std::stoll(row[0]);
      b = std::stoll(row[1]);
    } catch (const std::logic_error&) {
      if (i == 0) continue;  // header
      bad_spec(spec, file + " row " + std::to_string(i + 1) + " is not numeric");
    }
    if (a < 1 || b < 1 || a > p || b > p) {
      bad_spec(spec, file + " row " + std::to_string(i + 1) + ": indices are 1-based and must not exceed p = " +
                         std::to_string(p));
    }
    pairs.push_back({static_cast<Index>(a - 1), static_cast<Index>(b - 1)});
  }
  return IndexSet(std::move(pairs), p);
}

}  // namespace

std::size_t resolve_group(const std::string& token, const GroupInfo& groups) {
  for (std::size_t h = 0; h < groups.names.size(); ++h) {
    if (groups.names[h] == token) return h;
  }
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used == token.size() && v >= 1 && static_cast<std::size_t>(v) <= groups.members.size()) {
      return static_cast<std::size_t>(v - 1);
    }
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::InvalidConfig, "unknown group '" + token + "'");
}

IndexSet parse_index_set(const std::string& spec, Index p, const GroupInfo* groups) {
  const auto t = tokens(spec);
  if (t.empty()) bad_spec(spec, "empty specification");
  const std::string& kind = t[0];
  if (kind == "offdiag") {
    if (t.size() != 1) bad_spec(spec, "offdiag takes no arguments");
    return index_set_all_offdiag(p);
  }
  if (kind == "zeros-of") {
    if (t.size() != 2) bad_spec(spec, "usage: zeros-of FILE");
    return zeros_of(spec, t[1], p);
  }
  if (kind == "band-outside") {
    if (t.size() != 2) bad_spec(spec, "usage: band-outside K");
    return index_set_band_outside(p, parse_count(spec, t[1]));
  }
  if (kind == "pairs") {
    if (t.size() != 2) bad_spec(spec, "usage: pairs FILE");
    return pairs_file(spec, t[1], p);
  }
  if (kind == "block") {
    if (t.size() != 3) bad_spec(spec, "usage: block H1 H2");
    if (!groups) bad_spec(spec, "block sets need --groups");
    return index_set_from_blocks(groups->members, resolve_group(t[1], *groups), resolve_group(t[2], *groups), p);
  }
  bad_spec(spec, "unknown kind '" + kind + "' (expected offdiag, zeros-of, band-outside, pairs or block)");
}

}  // namespace hdprec::cli
