#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/grid.hpp"
#include "alphamcts/stats.hpp"

namespace alphamcts {

enum class Feature : std::uint8_t { open, high, low, close, volume, vwap };

inline constexpr std::size_t kFeatureCount = 6;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "open", "high", "low", "close", "volume", "vwap"};
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures{
    Feature::open, Feature::high, Feature::low, Feature::close, Feature::volume, Feature::vwap};

inline std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace detail

inline std::optional<Feature> feature_from_name(std::string_view name) {
  const auto lower = detail::to_lower(detail::trim(name));
  for (std::size_t k = 0; k < kFeatureCount; ++k)
    if (kFeatureNames[k] == lower) return kAllFeatures[k];
  return std::nullopt;
}

/// The market history tensor X (T days × n stocks × 6 features) with a
/// missing-cell mask. Immutable once built; all consumers ignore masked cells.
class MarketPanel {
 public:
  MarketPanel() = default;
  MarketPanel(std::vector<std::string> dates, std::vector<std::string> symbols)
      : dates_(std::move(dates)), symbols_(std::move(symbols)), missing_(dates_.size(), symbols_.size(), 1) {
    for (auto& f : features_) f = RealGrid(dates_.size(), symbols_.size(), kNaN);
  }

  std::size_t days() const noexcept { return dates_.size(); }
  std::size_t stocks() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& dates() const noexcept { return dates_; }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  const RealGrid& feature(Feature f) const { return features_[static_cast<std::size_t>(f)]; }
  double value(Feature f, std::size_t t, std::size_t i) const { return feature(f)(t, i); }
  const MaskGrid& missing() const noexcept { return missing_; }
  bool is_missing(std::size_t t, std::size_t i) const { return missing_(t, i) != 0; }

  /// Fills one (day, stock) cell and marks it present.
  void set_cell(std::size_t t, std::size_t i, const std::array<double, kFeatureCount>& values) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) features_[k](t, i) = values[k];
    missing_(t, i) = 0;
  }

  void mask_cell(std::size_t t, std::size_t i) {
    for (auto& f : features_) f(t, i) = kNaN;
    missing_(t, i) = 1;
  }

  /// Throws Error when a structural invariant is broken.
  void check_invariants() const {
    for (std::size_t t = 1; t < dates_.size(); ++t)
      if (!(dates_[t - 1] < dates_[t])) throw Error("dates not strictly increasing at " + dates_[t]);
    std::set<std::string> seen(symbols_.begin(), symbols_.end());
    if (seen.size() != symbols_.size()) throw Error("duplicate symbols in panel");
    for (std::size_t t = 0; t < days(); ++t)
      for (std::size_t i = 0; i < stocks(); ++i) {
        if (is_missing(t, i)) continue;
        for (std::size_t k = 0; k < kFeatureCount; ++k) {
          const double v = features_[k](t, i);
          const bool ok = kAllFeatures[k] == Feature::volume ? v >= 0.0 : v > 0.0;
          if (!std::isfinite(v) || !ok)
            throw Error("invalid " + std::string(kFeatureNames[k]) + " at " + dates_[t] + "/" + symbols_[i]);
        }
      }
  }

  friend bool operator==(const MarketPanel& a, const MarketPanel& b) {
    if (a.dates_ != b.dates_ || a.symbols_ != b.symbols_ || a.missing_ != b.missing_) return false;
    for (std::size_t k = 0; k < kFeatureCount; ++k)
      for (std::size_t t = 0; t < a.days(); ++t)
        for (std::size_t i = 0; i < a.stocks(); ++i)
          if (!a.is_missing(t, i) && a.features_[k](t, i) != b.features_[k](t, i)) return false;
    return true;
  }

 private:
  std::vector<std::string> dates_;
  std::vector<std::string> symbols_;
  std::array<RealGrid, kFeatureCount> features_;
  MaskGrid missing_;
};

/// Realized simple returns Y over `horizon` days: close[t+w]/close[t] - 1.
struct ReturnMatrix : MaskedGrid {
  int horizon = 1;
  ReturnMatrix() = default;
  ReturnMatrix(std::size_t rows, std::size_t cols, int w) : MaskedGrid(rows, cols), horizon(w) {}
};

/// Parses the panel CSV (`date,symbol,open,high,low,close,volume,vwap`, any
/// column order, case-insensitive header). Absent (date, symbol) pairs and
/// rows with empty fields become masked cells.
inline MarketPanel parse_panel(std::istream& in) {
  struct Row {
    std::string date, symbol;
    std::array<double, kFeatureCount> values{};
    bool present = true;
  };
  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, kFeatureCount + 2> column{};  // date, symbol, features...
  std::size_t width = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (line_no == 0 || detail::trim(line).empty()) throw ParseError("empty panel file", line_no);
  {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split(line, ',');
    width = header.size();
    std::map<std::string, std::size_t> by_name;
    for (std::size_t c = 0; c < header.size(); ++c) by_name[detail::to_lower(detail::trim(header[c]))] = c;
    const std::array<std::string_view, kFeatureCount + 2> wanted{"date", "symbol", "open", "high", "low", "close", "volume", "vwap"};
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      auto it = by_name.find(std::string(wanted[k]));
      if (it == by_name.end()) throw ParseError("missing column '" + std::string(wanted[k]) + "' in header", line_no);
      column[k] = it->second;
    }
  }

  std::vector<Row> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()), line_no);
    Row row;
    row.date = std::string(detail::trim(fields[column[0]]));
    row.symbol = std::string(detail::trim(fields[column[1]]));
    if (!detail::is_iso_date(row.date)) throw ParseError("invalid date '" + row.date + "'", line_no);
    if (row.symbol.empty()) throw ParseError("empty symbol", line_no);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      const auto text = detail::trim(fields[column[k + 2]]);
      if (text.empty()) {
        row.present = false;
        continue;
      }
      const auto v = detail::parse_double(text);
      const bool is_volume = kAllFeatures[k] == Feature::volume;
      if (!v || !std::isfinite(*v))
        throw ParseError("invalid " + std::string(kFeatureNames[k]) + " value '" + std::string(text) + "'", line_no);
      if (is_volume ? *v < 0.0 : *v <= 0.0)
        throw ParseError("out-of-range " + std::string(kFeatureNames[k]) + " value '" + std::string(text) + "'", line_no);
      row.values[k] = *v;
    }
    auto [it, inserted] = seen.emplace(std::make_pair(row.date, row.symbol), line_no);
    if (!inserted)
      throw ConflictError("duplicate row for " + row.date + "/" + row.symbol + " (first at line " +
                              std::to_string(it->second) + ")",
                          line_no);
    rows.push_back(std::move(row));
  }

  std::set<std::string> date_set, symbol_set;
  for (const auto& r : rows) {
    date_set.insert(r.date);
    symbol_set.insert(r.symbol);
  }
  std::vector<std::string> dates(date_set.begin(), date_set.end());
  std::vector<std::string> symbols(symbol_set.begin(), symbol_set.end());
  MarketPanel panel(dates, symbols);
  auto index_of = [](const std::vector<std::string>& v, const std::string& key) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), key) - v.begin());
  };
  for (const auto& r : rows)
    if (r.present) panel.set_cell(index_of(dates, r.date), index_of(symbols, r.symbol), r.values);
  return panel;
}

inline MarketPanel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open panel file '" + path + "'");
  return parse_panel(in);
}

/// Writes every (date, symbol) pair; masked cells get empty feature fields so
/// that parse_panel restores the same grid.
inline void write_panel(const MarketPanel& panel, std::ostream& out) {
  out << "date,symbol,open,high,low,close,volume,vwap\n";
  for (std::size_t t = 0; t < panel.days(); ++t)
    for (std::size_t i = 0; i < panel.stocks(); ++i) {
      out << panel.dates()[t] << ',' << panel.symbols()[i];
      for (auto f : kAllFeatures) {
        out << ',';
        if (!panel.is_missing(t, i)) out << detail::format_double(panel.value(f, t, i));
      }
      out << '\n';
    }
}

inline void save_panel(const MarketPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write panel file '" + path + "'");
  write_panel(panel, out);
}

/// Y[t,i] = close[t+w,i]/close[t,i] - 1; the last w days and any pair touching
/// a masked cell are invalid.
inline ReturnMatrix forward_returns(const MarketPanel& panel, int w) {
  const std::size_t T = panel.days();
  if (w < 1 || static_cast<std::size_t>(w) >= T)
    throw InvalidHorizon("horizon " + std::to_string(w) + " outside [1, " + std::to_string(T) + ")");
  ReturnMatrix out(T, panel.stocks(), w);
  const auto& close = panel.feature(Feature::close);
  for (std::size_t t = 0; t + static_cast<std::size_t>(w) < T; ++t)
    for (std::size_t i = 0; i < panel.stocks(); ++i) {
      const std::size_t u = t + static_cast<std::size_t>(w);
      if (panel.is_missing(t, i) || panel.is_missing(u, i)) continue;
      out.set(t, i, close(u, i) / close(t, i) - 1.0);
    }
  return out;
}

/// Per day, maps valid finite entries to (rank-1)/(count-1) using average
/// ranks; a lone entry maps to 0.5. Everything else is invalid.
inline MaskedGrid cross_sectional_rank(const RealGrid& values, const MaskGrid& valid) {
  MaskedGrid out(values.rows(), values.cols());
  std::vector<double> day;
  std::vector<std::size_t> cols;
  for (std::size_t t = 0; t < values.rows(); ++t) {
    day.clear();
    cols.clear();
    for (std::size_t i = 0; i < values.cols(); ++i)
      if (valid(t, i) && std::isfinite(values(t, i))) {
        day.push_back(values(t, i));
        cols.push_back(i);
      }
    if (day.empty()) continue;
    if (day.size() == 1) {
      out.set(t, cols[0], 0.5);
      continue;
    }
    const auto ranks = stats::average_ranks(day);
    const double denom = static_cast<double>(day.size() - 1);
    for (std::size_t k = 0; k < day.size(); ++k) out.set(t, cols[k], (ranks[k] - 1.0) / denom);
  }
  return out;
}

inline MaskedGrid cross_sectional_rank(const MaskedGrid& m) { return cross_sectional_rank(m.values, m.valid); }

}  // namespace alphamcts
