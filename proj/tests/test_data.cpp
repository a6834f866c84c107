#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "latsim/klines.hpp"
#include "json.hpp"
#include "latsim/ingest.hpp"
#include "latsim/windowing.hpp"

using namespace latsim;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no latsim::Error thrown";
  return ErrorCode::Usage;
}

OhlcSeries flat_series(const std::string& id, std::size_t n, std::int64_t step = 3600000) {
  OhlcSeries s;
  s.entity_id = id;
  for (std::size_t t = 0; t < n; ++t) {
    const double p = 100.0 + static_cast<double>(t);
    s.push_back(static_cast<std::int64_t>(t) * step, p, p + 1.0, p - 1.0, p + 0.5);
  }
  return s;
}

}  // namespace

// ---- ingest ------------------------------------------------------------------

TEST(Ingest, LogReturnOfTenPercentMove) {
  OhlcSeries s;
  s.entity_id = "X";
  s.push_back(0, 100, 100, 100, 100);
  s.push_back(1, 110, 110, 110, 110);
  const auto r = log_returns(s);
  ASSERT_EQ(r.length(), 1);
  ASSERT_EQ(r.channels(), 4);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(r.values(0, c), 0.0953102, 1e-7);
  EXPECT_EQ(r.timestamps, std::vector<std::int64_t>{1});
}

TEST(Ingest, LogReturnsNeedTwoBars) {
  EXPECT_EQ(code_of([] { log_returns(flat_series("A", 1)); }), ErrorCode::SeriesTooShort);
}

TEST(Ingest, LogReturnsInvariantToPriceScale) {
  auto s = flat_series("A", 50);
  auto scaled = s;
  for (auto* v : {&scaled.open, &scaled.high, &scaled.low, &scaled.close})
    for (auto& p : *v) p *= 1024.0;
  EXPECT_EQ(log_returns(s).values, log_returns(scaled).values);
  for (auto* v : {&scaled.open, &scaled.high, &scaled.low, &scaled.close})
    for (auto& p : *v) p *= 3.7;
  EXPECT_LT((log_returns(s).values - log_returns(scaled).values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ingest, CsvRoundTripIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  OhlcSeries s;
  s.entity_id = "BTC";
  for (int t = 0; t < 100; ++t) {
    const double o = 100 * u(rng), c = 100 * u(rng);
    s.push_back(1700000000000 + t * 60000, o, std::max(o, c) * 1.01, std::min(o, c) * 0.99, c);
  }
  EXPECT_EQ(parse_csv(to_csv(s), "BTC"), s);
}

TEST(Ingest, CsvRowsAreSortedByTimestamp) {
  const auto s = parse_csv("timestamp,open,high,low,close\n2,1,1,1,1\n1,2,2,2,2\n", "A");
  EXPECT_EQ(s.timestamps, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(s.close, (std::vector<double>{2, 1}));
}

TEST(Ingest, CsvErrors) {
  EXPECT_EQ(code_of([] { parse_csv("timestamp,open,high,low,close\n1,1,1,1,1\n1,2,2,2,2\n", "A"); }),
            ErrorCode::NonMonotonicTimestamps);
  EXPECT_EQ(code_of([] { parse_csv("timestamp,open,high,low,close\n1,1,1,0,1\n", "A"); }),
            ErrorCode::NonPositivePrice);
  EXPECT_EQ(code_of([] { parse_csv("timestamp,open,high,low,close\n1,1,1,-3,1\n", "A"); }),
            ErrorCode::NonPositivePrice);
  EXPECT_EQ(code_of([] { parse_csv("ts,o,h,l,c\n1,1,1,1,1\n", "A"); }), ErrorCode::MalformedRow);
  try {
    parse_csv("timestamp,open,high,low,close\n1,1,1,1,1\n2,1,x,1,1\n", "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Ingest, GapPolicy) {
  auto s = flat_series("A", 10);
  // drop bars 4 and 5
  OhlcSeries g;
  g.entity_id = "A";
  for (std::size_t t = 0; t < s.size(); ++t)
    if (t != 4 && t != 5) g.push_back(s.timestamps[t], s.open[t], s.high[t], s.low[t], s.close[t]);
  const auto gaps = find_gaps(g, 3600000);
  ASSERT_EQ(gaps.size(), 1u);
  EXPECT_EQ(gaps[0].missing, 2);
  EXPECT_EQ(gaps[0].after, 3 * 3600000);
  EXPECT_EQ(code_of([&] { enforce_continuity(g, 3600000, 1, false); }), ErrorCode::GapDetected);
  EXPECT_EQ(enforce_continuity(g, 3600000, 2, false), g);
  const auto filled = enforce_continuity(g, 3600000, 0, true);
  ASSERT_EQ(filled.size(), 10u);
  EXPECT_EQ(filled.timestamps, s.timestamps);
  EXPECT_EQ(filled.open[4], g.close[3]);
  EXPECT_EQ(filled.high[5], g.close[3]);
}

// ---- windowing ---------------------------------------------------------------

TEST(Windowing, ZnormOfTwoPoints) {
  Eigen::MatrixXd w(2, 1);
  w << 1.0, 3.0;
  const auto z = znorm_window(w);
  EXPECT_NEAR(z(0, 0), -0.70711, 1e-5);
  EXPECT_NEAR(z(1, 0), 0.70711, 1e-5);
}

TEST(Windowing, ConstantColumnMapsToZero) {
  Eigen::MatrixXd w(5, 2);
  w.col(0).setConstant(3.0);
  w.col(1) << 1, 2, 3, 4, 5;
  const auto z = znorm_window(w);
  EXPECT_TRUE(z.col(0).isZero(0.0));
  EXPECT_NEAR(z.col(1).mean(), 0.0, 1e-15);
  const auto m = minmax_window(w);
  EXPECT_TRUE(m.col(0).isZero(0.0));
  EXPECT_DOUBLE_EQ(m(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(m(4, 1), 1.0);
}

TEST(Windowing, ZnormMomentsAndAffineInvariance) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> a(0.1, 10.0), b(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd w(30, 4);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = g(rng);
    const auto z = znorm_window(w);
    for (Eigen::Index c = 0; c < 4; ++c) {
      EXPECT_NEAR(z.col(c).mean(), 0.0, 1e-12);
      EXPECT_NEAR(z.col(c).squaredNorm() / 29.0, 1.0, 1e-12);
    }
    Eigen::MatrixXd t = w;
    for (Eigen::Index c = 0; c < 4; ++c) t.col(c) = (a(rng) * w.col(c).array() + b(rng)).matrix();
    EXPECT_LT((znorm_window(t) - z).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((minmax_window(t) - minmax_window(w)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Windowing, WindowCountFormula) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(2, 200), win(2, 40), str(1, 15);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = len(rng), L = win(rng), s = str(rng);
    const std::size_t expected = T < L ? 0 : static_cast<std::size_t>((T - L) / s + 1);
    EXPECT_EQ(window_count(T, L, s), expected);
    if (T >= L) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Random(T, 2);
      const auto ws = segment(m, L, s);
      ASSERT_EQ(ws.size(), expected);
      EXPECT_EQ(ws.back(), m.middleRows(static_cast<Eigen::Index>(expected - 1) * s, L));
    }
  }
}

TEST(Windowing, SegmentErrors) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(10, 4);
  EXPECT_EQ(code_of([&] { segment(m, 11, 1); }), ErrorCode::SeriesTooShort);
  EXPECT_EQ(code_of([&] { segment(m, 5, 0); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { parse_window_norm("robust"); }), ErrorCode::ConfigInvalid);
}

TEST(Windowing, BatchSkipsShortSeriesAndOrdersByEntity) {
  const auto b = log_returns(flat_series("B", 41));
  const auto a = log_returns(flat_series("A", 35));
  const auto c = log_returns(flat_series("C", 10));
  const auto batch = build_batch({b, c, a}, 30, 1);
  EXPECT_EQ(batch.counts.at("A"), 5u);
  EXPECT_EQ(batch.counts.at("B"), 11u);
  EXPECT_FALSE(batch.counts.contains("C"));
  ASSERT_EQ(batch.skipped.size(), 1u);
  EXPECT_EQ(batch.skipped[0].entity_id, "C");
  ASSERT_EQ(batch.size(), 16u);
  EXPECT_EQ(batch.windows.front().entity_id, "A");
  EXPECT_EQ(batch.windows[5].entity_id, "B");
  EXPECT_EQ(batch.windows[5].window_index, 0u);
  EXPECT_EQ(code_of([&] { build_batch({c}, 30, 1); }), ErrorCode::EmptyBatch);
}

// ---- kline client against a local mock server ------------------------------------

namespace {

struct MockExchange {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};

  template <typename Handler>
  explicit MockExchange(Handler h) {
    server.Get("/api/v3/klines", [this, h](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      h(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockExchange() {
    server.stop();
    thread.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/api/v3/klines"; }
};

constexpr std::int64_t kHour = 3600000;

// Serves hourly bars on [0, bars) honoring startTime/endTime/limit; bars in
// `missing` are absent.
void serve_bars(const httplib::Request& req, httplib::Response& res, std::int64_t bars,
                const std::set<std::int64_t>& missing = {}) {
  const auto start = std::stoll(req.get_param_value("startTime"));
  const auto end = std::stoll(req.get_param_value("endTime"));
  const auto limit = std::stoll(req.get_param_value("limit"));
  nlohmann::json page = nlohmann::json::array();
  for (std::int64_t k = 0; k < bars && static_cast<std::int64_t>(page.size()) < limit; ++k) {
    const auto ts = k * kHour;
    if (ts < start || ts > end || missing.contains(k)) continue;
    const auto p = std::to_string(100 + k) + ".5";
    page.push_back({ts, p, p, p, p, "1.0", ts + kHour - 1});
  }
  res.set_content(page.dump(), "application/json");
}

FetchOptions fast_options() {
  FetchOptions o;
  o.page_limit = 500;
  o.backoff_base = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST(Klines, PaginatesTwoFullPages) {
  MockExchange ex([](const httplib::Request& req, httplib::Response& res) { serve_bars(req, res, 1000); });
  const auto s = fetch_klines(ex.endpoint(), "BTCUSDT", 0, 999 * kHour, fast_options());
  ASSERT_EQ(s.size(), 1000u);
  EXPECT_EQ(s.timestamps.front(), 0);
  EXPECT_EQ(s.timestamps.back(), 999 * kHour);
  EXPECT_DOUBLE_EQ(s.close[500], 600.5);
  EXPECT_GE(ex.requests.load(), 2);
  EXPECT_LE(ex.requests.load(), 3);
}

TEST(Klines, RetriesTransientFailures) {
  std::atomic<int> calls{0};
  MockExchange ex([&](const httplib::Request& req, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 500;
      return;
    }
    serve_bars(req, res, 100);
  });
  const auto s = fetch_klines(ex.endpoint(), "ETHUSDT", 0, 99 * kHour, fast_options());
  EXPECT_EQ(s.size(), 100u);
}

TEST(Klines, FiveServerErrorsRaiseHttpError) {
  MockExchange ex([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  EXPECT_EQ(code_of([&] { fetch_klines(ex.endpoint(), "BTCUSDT", 0, 99 * kHour, fast_options()); }),
            ErrorCode::HttpError);
  EXPECT_EQ(ex.requests.load(), 5);
}

TEST(Klines, MissingBarsRaiseGapDetected) {
  MockExchange ex([](const httplib::Request& req, httplib::Response& res) { serve_bars(req, res, 100, {40, 41}); });
  EXPECT_EQ(code_of([&] { fetch_klines(ex.endpoint(), "BTCUSDT", 0, 99 * kHour, fast_options()); }),
            ErrorCode::GapDetected);
  auto ff = fast_options();
  ff.forward_fill = true;
  const auto s = fetch_klines(ex.endpoint(), "BTCUSDT", 0, 99 * kHour, ff);
  EXPECT_EQ(s.size(), 100u);
  EXPECT_DOUBLE_EQ(s.open[40], s.close[39]);
}
