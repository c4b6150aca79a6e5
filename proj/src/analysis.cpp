#include "keyshap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {

void ConfidenceTable::validate() const {
  if (names.empty()) throw Error(ErrorKind::kMalformedInput, "confidence table has no columns");
  if (rows.size() < 2) throw Error(ErrorKind::kMalformedInput, "confidence table needs at least 2 rows");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != names.size())
      throw Error(ErrorKind::kDimensionMismatch, "confidence row " + std::to_string(r) + " has " +
                                                     std::to_string(rows[r].size()) + " entries");
    for (const auto& v : rows[r])
      if (v && !(*v >= 0.0 && *v <= 1.0))
        throw Error(ErrorKind::kMalformedInput, "confidence " + format_number(*v) + " outside [0, 1]");
  }
}

ConfidenceTable parse_confidence_csv(std::string_view text) {
  const auto csv = parse_csv(text);
  if (csv.empty()) throw Error(ErrorKind::kMalformedInput, "empty confidence CSV");
  ConfidenceTable t;
  t.names = csv[0];
  for (std::size_t r = 1; r < csv.size(); ++r) {
    if (csv[r].size() != t.names.size())
      throw Error(ErrorKind::kDimensionMismatch, "confidence CSV row " + std::to_string(r) + " has " +
                                                     std::to_string(csv[r].size()) + " fields");
    auto& row = t.rows.emplace_back();
    for (const auto& cell : csv[r]) {
      if (cell.find_first_not_of(" \t") == std::string::npos) row.emplace_back(std::nullopt);
      else row.emplace_back(parse_double(cell, "confidence CSV"));
    }
  }
  t.validate();
  return t;
}

std::string write_confidence_csv(const ConfidenceTable& table) {
  std::string out = join_csv(table.names) + "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      if (row[i]) out += format_number(*row[i]);
    }
    out += "\n";
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto m = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= m;
  mb /= m;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationResult confidence_correlation(const ConfidenceTable& table) {
  table.validate();
  const std::size_t n = table.names.size();
  CorrelationResult res;
  res.r = SquareMatrix(n);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    res.r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      a.clear();
      b.clear();
      for (const auto& row : table.rows)
        if (row[i] && row[j]) {
          a.push_back(*row[i]);
          b.push_back(*row[j]);
        }
      if (a.size() < 2)
        throw Error(ErrorKind::kInsufficientPairs, "keypoints '" + table.names[i] + "' and '" +
                                                       table.names[j] + "' share fewer than 2 rows");
      double r = pearson(a, b);
      if (std::isnan(r)) {
        r = 0.0;
        res.zero_variance_pairs.emplace_back(i, j);
      }
      res.r(i, j) = res.r(j, i) = r;
    }
  }
  return res;
}

ConfidenceTable synthetic_confidence_table(const Grouping& grouping,
                                           const std::vector<std::string>& names, std::size_t rows,
                                           std::uint64_t seed, double loading, double noise,
                                           double missing_rate) {
  const std::size_t n = grouping.keypoints();
  if (names.size() != n) throw Error(ErrorKind::kSchemaMismatch, "names do not match the grouping");
  ConfidenceTable t;
  t.names = names;
  for (std::size_t r = 0; r < rows; ++r) {
    CounterRng rng(mix_key(seed, {r}));
    std::vector<double> latent(grouping.size());
    for (auto& z : latent) z = rng.normal();
    auto& row = t.rows.emplace_back(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double x = loading * latent[grouping.group_of(k)] + noise * rng.normal();
      const double drop = rng.uniform();
      if (drop < missing_rate) continue;
      row[k] = 1.0 / (1.0 + std::exp(-x));
    }
  }
  return t;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr int kLow[3] = {0xff, 0xff, 0xff};
constexpr int kHigh[3] = {0xb2, 0x18, 0x2b};

std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[8];
  int c[3];
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(kLow[k] + (kHigh[k] - kLow[k]) * t));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace

std::string render_heatmap(const SquareMatrix& matrix, const std::vector<std::string>& labels,
                           const HeatmapOptions& options) {
  const std::size_t n = matrix.size();
  if (n == 0) throw Error(ErrorKind::kMalformedInput, "empty matrix");
  if (labels.size() != n)
    throw Error(ErrorKind::kDimensionMismatch, "heatmap needs " + std::to_string(n) + " labels");
  for (double v : matrix.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::kNonFinite, "heatmap input has NaN or infinite entries");
  const auto [lo_it, hi_it] = std::minmax_element(matrix.data().begin(), matrix.data().end());
  const double vmin = options.vmin.value_or(std::min(0.0, *lo_it));
  const double vmax = options.vmax.value_or(*hi_it);

  const int cell = options.cell;
  std::size_t longest = 1;
  for (const auto& l : labels) longest = std::max(longest, l.size());
  const int margin = 12 + static_cast<int>(longest) * 7;
  const int top = margin + (options.title.empty() ? 0 : 24);
  const int width = margin + cell * static_cast<int>(n) + 10;
  const int height = top + cell * static_cast<int>(n) + 10;

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" data-vmin=\"" + format_number(vmin) +
         "\" data-vmax=\"" + format_number(vmax) + "\" data-color-min=\"" + ramp_color(0.0) +
         "\" data-color-max=\"" + ramp_color(1.0) + "\">\n";
  svg += "<desc>linear color ramp " + ramp_color(0.0) + " at " + format_number(vmin) + " to " +
         ramp_color(1.0) + " at " + format_number(vmax) + "</desc>\n";
  svg += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  if (!options.title.empty())
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"16\" text-anchor=\"middle\">" +
           xml_escape(options.title) + "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const int pos = static_cast<int>(i) * cell + cell / 2;
    svg += "<text class=\"row-label\" x=\"" + std::to_string(margin - 4) + "\" y=\"" +
           std::to_string(top + pos + 4) + "\" text-anchor=\"end\">" + xml_escape(labels[i]) + "</text>\n";
    svg += "<text class=\"col-label\" x=\"" + std::to_string(margin + pos) + "\" y=\"" +
           std::to_string(top - 4) + "\" text-anchor=\"start\" transform=\"rotate(-90 " +
           std::to_string(margin + pos) + " " + std::to_string(top - 4) + ")\">" + xml_escape(labels[i]) +
           "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = matrix(i, j);
      const double t = vmax > vmin ? (v - vmin) / (vmax - vmin) : 1.0;
      const int x = margin + static_cast<int>(j) * cell;
      const int y = top + static_cast<int>(i) * cell;
      svg += "<rect class=\"cell\" data-row=\"" + std::to_string(i) + "\" data-col=\"" + std::to_string(j) +
             "\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + ramp_color(t) +
             "\"/>\n";
      svg += "<text class=\"value\" x=\"" + std::to_string(x + cell / 2) + "\" y=\"" +
             std::to_string(y + cell / 2 + 4) + "\" text-anchor=\"middle\" fill=\"" +
             (t > 0.6 ? "#ffffff" : "#000000") + "\">" + fixed(v, options.decimals) + "</text>\n";
    }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace keyshap
