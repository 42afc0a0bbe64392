#pragma once

// CSV exchange. Every file is a header line followed by rows of numbers,
// comma separated, LF line endings. Numbers are written with 17 significant
// digits so that write -> read -> write is a byte-level fixpoint.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"

namespace rankdist::io {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  /// 1-indexed file line of each row.
  std::vector<std::size_t> lines;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view field, const std::string& where, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec == std::errc::result_out_of_range) {
    // Subnormals are representable; some from_chars versions still refuse them.
    const std::string copy(field);
    char* end = nullptr;
    v = std::strtod(copy.c_str(), &end);
    res = {field.data() + (end - copy.c_str()), std::isfinite(v) ? std::errc{} : std::errc::result_out_of_range};
  }
  if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line) + ": '" + std::string(field) + "' is not a number",
                std::nullopt, line);
  }
  return v;
}

// Re-raises a validation error with the file name in front.
[[noreturn]] inline void rethrow_with_file(const Error& e, const std::filesystem::path& path) {
  throw Error(e.code(), path.string() + ": " + e.message(), e.rank(), e.line());
}

}  // namespace detail

/// Parses CSV text. When `expected_header` is non-empty the header must
/// match it exactly.
inline CsvTable parse_csv(std::istream& in, const std::string& where,
                          std::span<const std::string_view> expected_header = {}) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split(text);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(detail::trim(f));
      if (!expected_header.empty()) {
        bool ok = t.header.size() == expected_header.size();
        for (std::size_t i = 0; ok && i < t.header.size(); ++i) ok = t.header[i] == expected_header[i];
        if (!ok) {
          std::string want;
          for (auto h : expected_header) want += (want.empty() ? "" : ",") + std::string(h);
          throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) + ": expected header '" + want + "'",
                      std::nullopt, line_no);
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::ParseError,
                  where + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()),
                  std::nullopt, line_no);
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(detail::parse_number(f, where, line_no));
    t.rows.push_back(std::move(row));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::ParseError, where + ": empty file", std::nullopt, 1);
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path, std::span<const std::string_view> expected_header = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_csv(in, path.string(), expected_header);
}

inline void write_csv(std::ostream& out, std::span<const std::string> header,
                      const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

inline void write_csv(const std::filesystem::path& path, std::span<const std::string> header,
                      const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  write_csv(os, header, rows);
  write_text_file(path, os.str());
}

inline constexpr std::string_view kGroupedHeader[] = {"lo_pct", "hi_pct", "share"};
inline constexpr std::string_view kVolatilityHeader[] = {"lo_pct", "hi_pct", "sigma_low", "sigma_high"};
inline constexpr std::string_view kTrendHeader[] = {"lo_pct", "hi_pct", "growth_per_year"};
inline constexpr std::string_view kTaxHeader[] = {"lo_pct", "hi_pct", "tax_rate_per_year"};

namespace detail {

inline std::vector<std::string> header_of(std::span<const std::string_view> h) { return {h.begin(), h.end()}; }

inline std::vector<BracketRate> bracket_rates(const CsvTable& t) {
  std::vector<BracketRate> out;
  for (const auto& r : t.rows) out.push_back({{r[0], r[1]}, r[2]});
  return out;
}

}  // namespace detail

inline GroupedShares read_grouped_shares(const std::filesystem::path& path) {
  const auto t = read_csv(path, kGroupedHeader);
  std::vector<Bracket> brackets;
  std::vector<double> shares;
  for (const auto& r : t.rows) {
    brackets.push_back({r[0], r[1]});
    shares.push_back(r[2]);
  }
  try {
    return make_grouped_shares(std::move(brackets), std::move(shares));
  } catch (const Error& e) {
    detail::rethrow_with_file(e, path);
  }
}

inline void write_grouped_shares(const std::filesystem::path& path, const GroupedShares& g) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < g.brackets.size(); ++i) rows.push_back({g.brackets[i].lo_pct, g.brackets[i].hi_pct, g.shares[i]});
  write_csv(path, detail::header_of(kGroupedHeader), rows);
}

inline VolatilityTable read_volatility_table(const std::filesystem::path& path) {
  const auto t = read_csv(path, kVolatilityHeader);
  std::vector<Bracket> brackets;
  std::vector<double> low, high;
  for (const auto& r : t.rows) {
    brackets.push_back({r[0], r[1]});
    low.push_back(r[2]);
    high.push_back(r[3]);
  }
  try {
    return make_volatility_table(std::move(brackets), std::move(low), std::move(high));
  } catch (const Error& e) {
    detail::rethrow_with_file(e, path);
  }
}

inline void write_volatility_table(const std::filesystem::path& path, const VolatilityTable& v) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < v.brackets.size(); ++i) {
    rows.push_back({v.brackets[i].lo_pct, v.brackets[i].hi_pct, v.sigma_low[i], v.sigma_high[i]});
  }
  write_csv(path, detail::header_of(kVolatilityHeader), rows);
}

inline TrendSpec read_trend(const std::filesystem::path& path) {
  const auto t = read_csv(path, kTrendHeader);
  try {
    return make_trend(detail::bracket_rates(t));
  } catch (const Error& e) {
    detail::rethrow_with_file(e, path);
  }
}

inline TaxSchedule read_tax(const std::filesystem::path& path) {
  const auto t = read_csv(path, kTaxHeader);
  try {
    return make_tax(detail::bracket_rates(t));
  } catch (const Error& e) {
    detail::rethrow_with_file(e, path);
  }
}

inline void write_bracket_rates(const std::filesystem::path& path, std::span<const BracketRate> entries,
                                std::span<const std::string_view> header) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : entries) rows.push_back({e.bracket.lo_pct, e.bracket.hi_pct, e.rate});
  write_csv(path, detail::header_of(header), rows);
}

inline void write_trend(const std::filesystem::path& path, const TrendSpec& t) {
  write_bracket_rates(path, t.entries, kTrendHeader);
}

inline void write_tax(const std::filesystem::path& path, const TaxSchedule& t) {
  write_bracket_rates(path, t.entries, kTaxHeader);
}

/// Two-column file `rank,<name>` for a per-rank series (rank is 1-indexed).
inline void write_rank_series(const std::filesystem::path& path, std::string_view name, std::span<const double> values) {
  std::vector<std::vector<double>> rows;
  rows.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) rows.push_back({static_cast<double>(k + 1), values[k]});
  const std::string header[] = {"rank", std::string(name)};
  write_csv(path, header, rows);
}

inline std::vector<double> read_rank_series(const std::filesystem::path& path, std::string_view name) {
  const std::string_view header[] = {"rank", name};
  const auto t = read_csv(path, header);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][0] != static_cast<double>(i + 1)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(t.lines[i]) + ": ranks must run 1, 2, ...",
                  std::nullopt, t.lines[i]);
    }
    out.push_back(t.rows[i][1]);
  }
  return out;
}

}  // namespace rankdist::io
