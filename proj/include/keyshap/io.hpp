#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "keyshap/matrix.hpp"

namespace keyshap {

// On-disk tables use percent, in-memory values are fractions.
constexpr double to_percent(double fraction) noexcept { return fraction * 100.0; }
constexpr double from_percent(double percent) noexcept { return percent / 100.0; }

// Shortest "%.{digits}g" rendering; the canonical number format for CSV output.
std::string format_number(double value, int digits = 10);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

using CsvRow = std::vector<std::string>;

// Minimal RFC-4180 reader: quoted fields, CRLF tolerant. Blank lines and
// lines starting with '#' are skipped.
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
std::string join_csv(const CsvRow& row);

// Parses a finite double; throws Error(kMalformedInput) naming `what`.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

// Square matrix with a label header: "keypoint,<l0>,<l1>,..." then one
// "<li>,v..." row per label. `scale` multiplies values on write and divides
// on read (100 for percent tables).
struct LabeledMatrix {
  std::vector<std::string> labels;
  SquareMatrix values;
};

std::string write_labeled_matrix(const LabeledMatrix& m, double scale = 1.0, int digits = 10);
LabeledMatrix parse_labeled_matrix(std::string_view text, double scale = 1.0);

}  // namespace keyshap
