#include "keyshap/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "keyshap/error.hpp"

namespace keyshap {

std::string format_number(double value, int digits) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '#' ) {
      const auto eol = text.find('\n', pos);
      pos = eol == std::string_view::npos ? text.size() : eol + 1;
      continue;
    }
    CsvRow row;
    std::string field;
    bool quoted = false;
    bool any = false;
    while (pos < text.size()) {
      const char c = text[pos];
      if (quoted) {
        if (c == '"') {
          if (pos + 1 < text.size() && text[pos + 1] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
        ++pos;
        continue;
      }
      if (c == '"') {
        quoted = true;
        any = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
        any = true;
      } else if (c == '\n') {
        ++pos;
        break;
      } else if (c != '\r') {
        field.push_back(c);
        any = true;
      }
      ++pos;
    }
    if (quoted) throw Error(ErrorKind::kMalformedInput, "unterminated quoted CSV field");
    if (!any) continue;
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_csv(const CsvRow& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(row[i]);
  }
  return out;
}

namespace {
std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}
}  // namespace

double parse_double(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw Error(ErrorKind::kMalformedInput,
                "bad number '" + std::string(text) + "' in " + std::string(what));
  return v;
}

long long parse_int(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw Error(ErrorKind::kMalformedInput,
                "bad integer '" + std::string(text) + "' in " + std::string(what));
  return v;
}

std::string write_labeled_matrix(const LabeledMatrix& m, double scale, int digits) {
  std::string out = "keypoint";
  for (const auto& l : m.labels) out += "," + csv_escape(l);
  out += "\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += csv_escape(m.labels[i]);
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      out += "," + format_number(m.values(i, j) * scale, digits);
    out += "\n";
  }
  return out;
}

LabeledMatrix parse_labeled_matrix(std::string_view text, double scale) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorKind::kMalformedInput, "empty matrix CSV");
  LabeledMatrix m;
  m.labels.assign(rows[0].begin() + 1, rows[0].end());
  const std::size_t n = m.labels.size();
  if (rows.size() != n + 1)
    throw Error(ErrorKind::kDimensionMismatch,
                "matrix CSV has " + std::to_string(rows.size() - 1) + " rows for " +
                    std::to_string(n) + " columns");
  m.values = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    if (r.size() != n + 1)
      throw Error(ErrorKind::kMalformedInput, "matrix CSV row " + std::to_string(i + 1) +
                                                  " has " + std::to_string(r.size()) + " fields");
    if (r[0] != m.labels[i])
      throw Error(ErrorKind::kMalformedInput,
                  "row label '" + r[0] + "' does not match column '" + m.labels[i] + "'");
    for (std::size_t j = 0; j < n; ++j) m.values(i, j) = parse_double(r[j + 1], "matrix CSV") / scale;
  }
  return m;
}

}  // namespace keyshap
