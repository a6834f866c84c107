#ifndef LATSIM_KLINES_HPP_
#define LATSIM_KLINES_HPP_

// Paginated client for the public candlestick ("klines") REST format: GET
// <endpoint>?symbol=..&interval=..&startTime=..&endTime=..&limit=.. returning
// a JSON array of arrays whose elements 0..4 are open time and O/H/L/C as
// decimal strings.

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>

#include "httplib.h"
// <resolv.h> defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include "json.hpp"
#include "latsim/error.hpp"
#include "latsim/ingest.hpp"

namespace latsim {

struct FetchOptions {
  std::string interval = "1h";
  int page_limit = 1000;
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{200};  // doubled after each failure
  std::int64_t gap_tolerance = 0;
  bool forward_fill = false;
  std::chrono::seconds timeout{30};
};

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail(ErrorCode::ConfigInvalid, "endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline double decimal_field(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    if (auto d = io::parse_double(v.get<std::string>())) return *d;
  }
  fail(ErrorCode::MalformedRow, "kline price is not a decimal: " + v.dump());
}

}  // namespace detail

// Fetches [start_ms, end_ms] for one symbol. Each page is retried with
// exponential backoff; the assembled series is validated and passed through
// the gap policy in `opts`.
inline OhlcSeries fetch_klines(const std::string& endpoint, const std::string& symbol,
                               std::int64_t start_ms, std::int64_t end_ms,
                               const FetchOptions& opts = {}) {
  const std::int64_t step = interval_ms(opts.interval);
  const auto ep = detail::split_endpoint(endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(opts.timeout);
  client.set_read_timeout(opts.timeout);

  OhlcSeries out;
  out.entity_id = symbol;
  std::int64_t cursor = start_ms;
  while (cursor <= end_ms) {
    httplib::Params params{{"symbol", symbol},
                           {"interval", opts.interval},
                           {"startTime", std::to_string(cursor)},
                           {"endTime", std::to_string(end_ms)},
                           {"limit", std::to_string(opts.page_limit)}};
    std::string body;
    std::string last_error;
    bool ok = false;
    auto delay = opts.backoff_base;
    for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
      auto res = client.Get(ep.path, params, httplib::Headers{});
      if (res && res->status == 200) {
        body = res->body;
        ok = true;
        break;
      }
      last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
      if (attempt < opts.max_attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    if (!ok) {
      fail(ErrorCode::HttpError, symbol + ": page at " + std::to_string(cursor) + " failed after " +
                                     std::to_string(opts.max_attempts) + " attempts (" +
                                     last_error + ")");
    }

    nlohmann::json page;
    try {
      page = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedRow, symbol + ": invalid JSON payload: " + e.what());
    }
    if (!page.is_array()) fail(ErrorCode::MalformedRow, symbol + ": payload is not an array");
    if (page.empty()) break;

    std::int64_t last_open = cursor - 1;
    for (const auto& bar : page) {
      if (!bar.is_array() || bar.size() < 5 || !bar[0].is_number_integer())
        fail(ErrorCode::MalformedRow, symbol + ": malformed kline " + bar.dump());
      const auto ts = bar[0].get<std::int64_t>();
      if (ts > end_ms) continue;
      if (!out.timestamps.empty() && ts <= out.timestamps.back()) {
        fail(ErrorCode::NonMonotonicTimestamps,
             symbol + ": kline " + std::to_string(ts) + " is not after " +
                 std::to_string(out.timestamps.back()));
      }
      out.push_back(ts, detail::decimal_field(bar[1]), detail::decimal_field(bar[2]),
                    detail::decimal_field(bar[3]), detail::decimal_field(bar[4]));
      last_open = ts;
    }
    if (last_open < cursor) break;
    cursor = last_open + step;
    if (static_cast<int>(page.size()) < opts.page_limit) break;
  }

  validate(out);
  return enforce_continuity(out, step, opts.gap_tolerance, opts.forward_fill);
}

}  // namespace latsim

#endif  // LATSIM_KLINES_HPP_
