#include "hdprec/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace hdprec::io {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == "null";
}

}  // namespace

CsvTable parse_csv(const std::string& text, bool has_header) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (first && has_header) {
      table.header = std::move(cells);
    } else {
      table.rows.push_back(std::move(cells));
    }
    first = false;
  }
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  return parse_csv(read_text(path), has_header);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& raw, const std::string& where) {
  const std::string cell = trim(raw);
  if (is_missing(cell)) throw Error(ErrorCode::MissingValue, "missing value at " + where);
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::InvalidInput, "not a number at " + where + ": '" + cell + "'");
  }
  return value;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j) out += ',';
      out += header[j];
    }
    out += '\n';
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(const CsvTable& table) {
  const auto rows = static_cast<Index>(table.rows.size());
  if (rows == 0) throw Error(ErrorCode::InvalidInput, "CSV has no data rows");
  const auto cols = static_cast<Index>(table.rows.front().size());
  if (!table.header.empty() && static_cast<Index>(table.header.size()) != cols) {
    throw Error(ErrorCode::ShapeError, "header has " + std::to_string(table.header.size()) + " columns, row 1 has " +
                                           std::to_string(cols));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != cols) {
      throw Error(ErrorCode::ShapeError, "row " + std::to_string(i + 1) + " has " + std::to_string(row.size()) +
                                             " cells, expected " + std::to_string(cols));
    }
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = parse_double(row[static_cast<std::size_t>(j)],
                             "row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1));
    }
  }
  return m;
}

Matrix read_matrix(const std::filesystem::path& path, bool has_header) {
  return matrix_from_csv(read_csv(path, has_header));
}

NamedDataset read_dataset(const std::filesystem::path& path) {
  const auto table = read_csv(path, true);
  NamedDataset out{Dataset(matrix_from_csv(table)), table.header};
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::vector<std::string>& names) {
  std::vector<std::string> header = names;
  if (header.empty()) {
    for (Index j = 0; j < data.p(); ++j) header.push_back("y" + std::to_string(j + 1));
  }
  write_text(path, matrix_csv(data.values(), header));
}

std::vector<std::vector<Index>> groups_from_map(const CsvTable& map, const std::vector<std::string>& names,
                                                std::vector<std::string>* group_names,
                                                std::vector<std::string>* warnings) {
  std::map<std::string, std::string> lookup;
  for (const auto& row : map.rows) {
    if (row.size() < 2) throw Error(ErrorCode::InvalidInput, "group map rows need symbol,group");
    lookup[row[0]] = row[1];
  }
  std::vector<std::string> order;
  std::map<std::string, std::size_t> position;
  std::vector<std::vector<Index>> groups;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = lookup.find(names[j]);
    if (it == lookup.end() || it->second == "NA" || it->second.empty()) {
      if (warnings) warnings->push_back("symbol " + names[j] + " has no group (NA); skipped");
      continue;
    }
    auto [slot, inserted] = position.try_emplace(it->second, order.size());
    if (inserted) {
      order.push_back(it->second);
      groups.emplace_back();
    }
    groups[slot->second].push_back(static_cast<Index>(j));
  }
  if (group_names) *group_names = order;
  return groups;
}

Returns returns_from_prices(const CsvTable& prices, const ReturnsSpec& spec, const CsvTable* group_map) {
  const auto n_prices = prices.rows.size();
  if (n_prices < 2) throw Error(ErrorCode::InsufficientData, "need at least two price rows");
  const auto& symbols = prices.header;
  const std::size_t p = symbols.size();
  if (p == 0) throw Error(ErrorCode::InvalidInput, "price file has no header of symbols");

  Matrix px(static_cast<Index>(n_prices), static_cast<Index>(p));
  for (std::size_t t = 0; t < n_prices; ++t) {
    const auto& row = prices.rows[t];
    if (row.size() != p) {
      throw Error(ErrorCode::ShapeError, "price row " + std::to_string(t + 1) + " has " + std::to_string(row.size()) +
                                             " cells, expected " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) {
      const std::string where = "row " + std::to_string(t + 1) + ", symbol " + symbols[j];
      const double v = parse_double(row[j], where);
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidPrice, "non-positive price at " + where);
      px(static_cast<Index>(t), static_cast<Index>(j)) = v;
    }
  }

  Returns out;
  std::vector<Index> keep_cols;
  std::vector<std::string> map_warnings;
  std::vector<char> in_group(p, group_map ? 0 : 1);
  if (group_map) {
    std::vector<std::string> names;
    const auto groups = groups_from_map(*group_map, symbols, &names, &map_warnings);
    for (const auto& g : groups) {
      for (Index j : g) in_group[static_cast<std::size_t>(j)] = 1;
    }
  }
  out.warnings = map_warnings;

  const auto n = static_cast<Index>(n_prices - 1);
  Matrix ret(n, static_cast<Index>(p));
  for (Index t = 0; t < n; ++t) {
    for (Index j = 0; j < static_cast<Index>(p); ++j) {
      ret(t, j) = spec.log_returns ? std::log(px(t + 1, j)) - std::log(px(t, j)) : px(t + 1, j) / px(t, j) - 1.0;
    }
  }

  std::vector<std::string> kept;
  for (std::size_t j = 0; j < p; ++j) {
    if (!in_group[j]) continue;
    const auto col = ret.col(static_cast<Index>(j));
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    if (n < 2 || !(ss > 0.0) || ss <= 1e-24 * std::max(1.0, col.squaredNorm())) {
      out.warnings.push_back("symbol " + symbols[j] + " has zero return variance (sd 0); dropped");
      continue;
    }
    keep_cols.push_back(static_cast<Index>(j));
    kept.push_back(symbols[j]);
  }
  if (keep_cols.empty()) throw Error(ErrorCode::InsufficientData, "no usable symbols after filtering");

  Matrix y(n, static_cast<Index>(keep_cols.size()));
  for (std::size_t k = 0; k < keep_cols.size(); ++k) y.col(static_cast<Index>(k)) = ret.col(keep_cols[k]);
  if (spec.standardize) {
    for (Index k = 0; k < y.cols(); ++k) {
      const double mean = y.col(k).mean();
      y.col(k).array() -= mean;
      const double sd = std::sqrt(y.col(k).squaredNorm() / static_cast<double>(n - 1));
      y.col(k) /= sd;
    }
    out.data = center(Dataset(std::move(y)));
  } else {
    out.data = Dataset(std::move(y));
  }
  out.symbols = kept;
  if (group_map) out.groups = groups_from_map(*group_map, kept, &out.group_names, nullptr);
  return out;
}

Returns ingest_returns(const ReturnsSpec& spec) {
  const auto prices = read_csv(spec.price_csv, true);
  if (spec.group_map) {
    const auto map = read_csv(*spec.group_map, true);
    return returns_from_prices(prices, spec, &map);
  }
  return returns_from_prices(prices, spec, nullptr);
}

}  // namespace hdprec::io
