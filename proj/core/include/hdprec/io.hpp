#pragma once

// CSV in/out, datasets and price-file ingestion. Doubles are written with 17
// significant digits so that a write/read cycle is lossless.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdprec/core.hpp"

namespace hdprec::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text, bool has_header = true);
CsvTable read_csv(const std::filesystem::path& path, bool has_header = true);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

std::string format_double(double x);
/// Parses a finite or infinite double; empty and NA-like cells raise MissingValue.
double parse_double(const std::string& cell, const std::string& where);

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& header = {});
Matrix matrix_from_csv(const CsvTable& table);
Matrix read_matrix(const std::filesystem::path& path, bool has_header = false);

struct NamedDataset {
  Dataset data;
  std::vector<std::string> names;
};

/// Header row of column names, then one numeric row per observation.
NamedDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::vector<std::string>& names = {});

struct ReturnsSpec {
  std::filesystem::path price_csv;
  bool log_returns = true;
  bool standardize = true;
  std::optional<std::filesystem::path> group_map;  // CSV: symbol,group
};

struct Returns {
  Dataset data;
  std::vector<std::string> symbols;
  std::vector<std::string> group_names;
  std::vector<std::vector<Index>> groups;  // column indices into data
  std::vector<std::string> warnings;
};

Returns returns_from_prices(const CsvTable& prices, const ReturnsSpec& spec, const CsvTable* group_map);
Returns ingest_returns(const ReturnsSpec& spec);

/// symbol,group CSV to groups over the given column names; unknown and NA
/// entries are skipped and reported in `warnings`.
std::vector<std::vector<Index>> groups_from_map(const CsvTable& map, const std::vector<std::string>& names,
                                                std::vector<std::string>* group_names,
                                                std::vector<std::string>* warnings);

}  // namespace hdprec::io
