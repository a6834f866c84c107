#ifndef LATSIM_INGEST_HPP_
#define LATSIM_INGEST_HPP_

// OHLC price histories: CSV load/store, validation, bar-gap handling and the
// per-channel log-return transform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "latsim/error.hpp"
#include "latsim/io.hpp"

namespace latsim {

// Channel order of every OHLC-derived matrix.
enum Channel : int { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3 };
inline constexpr int kOhlcChannels = 4;

struct OhlcSeries {
  std::string entity_id;
  std::vector<std::int64_t> timestamps;  // epoch milliseconds
  std::vector<double> open, high, low, close;

  std::size_t size() const { return timestamps.size(); }

  const std::vector<double>& channel(int c) const {
    switch (c) {
      case kOpen: return open;
      case kHigh: return high;
      case kLow: return low;
      default: return close;
    }
  }

  void push_back(std::int64_t ts, double o, double h, double l, double c) {
    timestamps.push_back(ts);
    open.push_back(o);
    high.push_back(h);
    low.push_back(l);
    close.push_back(c);
  }

  bool operator==(const OhlcSeries&) const = default;
};

struct ReturnSeries {
  std::string entity_id;
  std::vector<std::int64_t> timestamps;  // later bar of each pair
  Eigen::MatrixXd values;                // (T_raw - 1) x channels

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index channels() const { return values.cols(); }
};

// Throws on length mismatch, non-increasing timestamps or non-positive prices.
inline void validate(const OhlcSeries& s) {
  const auto n = s.timestamps.size();
  if (s.open.size() != n || s.high.size() != n || s.low.size() != n || s.close.size() != n)
    fail(ErrorCode::LengthMismatch, s.entity_id + ": price arrays differ in length");
  for (std::size_t t = 1; t < n; ++t) {
    if (s.timestamps[t] <= s.timestamps[t - 1]) {
      fail(ErrorCode::NonMonotonicTimestamps,
           s.entity_id + ": timestamp " + std::to_string(s.timestamps[t]) +
               " does not follow " + std::to_string(s.timestamps[t - 1]));
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (int c = 0; c < kOhlcChannels; ++c) {
      const double p = s.channel(c)[t];
      if (!(p > 0.0) || !std::isfinite(p)) {
        fail(ErrorCode::NonPositivePrice,
             s.entity_id + ": price " + io::format_double(p) + " at bar " + std::to_string(t));
      }
    }
  }
}

inline constexpr std::string_view kCsvHeader = "timestamp,open,high,low,close";

// Parses CSV text. Rows may arrive in any order; they are sorted by timestamp
// and duplicates are rejected. Line numbers in errors are 1-based and count
// the header.
inline OhlcSeries parse_csv(std::string_view text, const std::string& entity_id) {
  struct Row {
    std::int64_t ts;
    double o, h, l, c;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF")
      line.remove_prefix(3);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader)
        fail(ErrorCode::MalformedRow, entity_id + ": line " + std::to_string(line_no) +
                                          ": expected header '" + std::string(kCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    auto fields = io::split(line);
    auto bad = [&](const std::string& why) {
      fail(ErrorCode::MalformedRow, entity_id + ": line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 5) bad("expected 5 fields, got " + std::to_string(fields.size()));
    auto ts = io::parse_int(fields[0]);
    if (!ts) bad("bad timestamp");
    double px[4];
    for (int c = 0; c < 4; ++c) {
      auto v = io::parse_double(fields[static_cast<std::size_t>(c) + 1]);
      if (!v || !std::isfinite(*v)) bad("bad price field " + std::to_string(c + 1));
      px[c] = *v;
    }
    rows.push_back({*ts, px[0], px[1], px[2], px[3], line_no});
  }
  if (!header_seen) fail(ErrorCode::MalformedRow, entity_id + ": missing header");

  for (const auto& r : rows) {
    for (double p : {r.o, r.h, r.l, r.c}) {
      if (!(p > 0.0)) {
        fail(ErrorCode::NonPositivePrice, entity_id + ": line " + std::to_string(r.line) +
                                              ": non-positive price " + io::format_double(p));
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  OhlcSeries s;
  s.entity_id = entity_id;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].ts == rows[i - 1].ts) {
      fail(ErrorCode::NonMonotonicTimestamps,
           entity_id + ": duplicate timestamp " + std::to_string(rows[i].ts) + " (lines " +
               std::to_string(rows[i - 1].line) + " and " + std::to_string(rows[i].line) + ")");
    }
    s.push_back(rows[i].ts, rows[i].o, rows[i].h, rows[i].l, rows[i].c);
  }
  return s;
}

inline OhlcSeries load_csv(const std::filesystem::path& path, const std::string& entity_id) {
  return parse_csv(io::read_file(path), entity_id);
}

inline std::string to_csv(const OhlcSeries& s) {
  std::string out(kCsvHeader);
  out += '\n';
  for (std::size_t t = 0; t < s.size(); ++t) {
    out += std::to_string(s.timestamps[t]);
    for (int c = 0; c < kOhlcChannels; ++c) {
      out += ',';
      out += io::format_double(s.channel(c)[t]);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const OhlcSeries& s, const std::filesystem::path& path) {
  io::write_file(path, to_csv(s));
}

// Per-channel consecutive-bar log returns, aligned to the later bar.
inline ReturnSeries log_returns(const OhlcSeries& s) {
  if (s.size() < 2)
    fail(ErrorCode::SeriesTooShort, s.entity_id + ": need at least 2 bars, have " +
                                        std::to_string(s.size()));
  const auto n = static_cast<Eigen::Index>(s.size()) - 1;
  ReturnSeries r;
  r.entity_id = s.entity_id;
  r.timestamps.assign(s.timestamps.begin() + 1, s.timestamps.end());
  r.values.resize(n, kOhlcChannels);
  for (int c = 0; c < kOhlcChannels; ++c) {
    const auto& p = s.channel(c);
    for (Eigen::Index t = 0; t < n; ++t) {
      r.values(t, c) = std::log(p[static_cast<std::size_t>(t) + 1] / p[static_cast<std::size_t>(t)]);
    }
  }
  if (!r.values.allFinite()) fail(ErrorCode::NonPositivePrice, s.entity_id + ": non-finite return");
  return r;
}

// Kline interval label ("1m", "1h", "1d", ...) to milliseconds.
inline std::int64_t interval_ms(std::string_view label) {
  static constexpr std::pair<std::string_view, std::int64_t> kTable[] = {
      {"1m", 60'000},        {"3m", 180'000},        {"5m", 300'000},
      {"15m", 900'000},      {"30m", 1'800'000},     {"1h", 3'600'000},
      {"2h", 7'200'000},     {"4h", 14'400'000},     {"6h", 21'600'000},
      {"8h", 28'800'000},    {"12h", 43'200'000},    {"1d", 86'400'000},
  };
  for (const auto& [name, ms] : kTable)
    if (name == label) return ms;
  fail(ErrorCode::ConfigInvalid, "unsupported interval '" + std::string(label) + "'");
}

struct Gap {
  std::int64_t after;  // timestamp of the last bar before the gap
  std::int64_t missing;
};

inline std::vector<Gap> find_gaps(const OhlcSeries& s, std::int64_t step_ms) {
  std::vector<Gap> gaps;
  for (std::size_t t = 1; t < s.size(); ++t) {
    const auto diff = s.timestamps[t] - s.timestamps[t - 1];
    if (diff > step_ms) gaps.push_back({s.timestamps[t - 1], (diff - 1) / step_ms});
  }
  return gaps;
}

// Applies the missing-bar policy. With forward_fill, every missing bar is
// inserted as a flat bar at the previous close; otherwise more than
// `tolerance` missing bars is an error listing the gaps.
inline OhlcSeries enforce_continuity(const OhlcSeries& s, std::int64_t step_ms,
                                     std::int64_t tolerance, bool forward_fill) {
  const auto gaps = find_gaps(s, step_ms);
  if (gaps.empty()) return s;
  if (forward_fill) {
    OhlcSeries out;
    out.entity_id = s.entity_id;
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t > 0) {
        const double prev = s.close[t - 1];
        for (auto ts = s.timestamps[t - 1] + step_ms; ts < s.timestamps[t]; ts += step_ms)
          out.push_back(ts, prev, prev, prev, prev);
      }
      out.push_back(s.timestamps[t], s.open[t], s.high[t], s.low[t], s.close[t]);
    }
    return out;
  }
  std::int64_t missing = 0;
  for (const auto& g : gaps) missing += g.missing;
  if (missing <= tolerance) return s;
  std::ostringstream msg;
  msg << s.entity_id << ": " << missing << " missing bar(s) exceed tolerance " << tolerance << ":";
  for (const auto& g : gaps) msg << " [after " << g.after << ", " << g.missing << " missing]";
  fail(ErrorCode::GapDetected, msg.str());
}

}  // namespace latsim

#endif  // LATSIM_INGEST_HPP_
