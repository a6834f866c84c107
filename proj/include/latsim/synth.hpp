#ifndef LATSIM_SYNTH_HPP_
#define LATSIM_SYNTH_HPP_

// Synthetic OHLC universes with planted structure: factor-driven clusters,
// cointegrated pairs and independent random walks, plus the ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latsim/error.hpp"
#include "latsim/ingest.hpp"

namespace latsim {

enum class Tails { Gaussian, StudentT };

struct ClusterSpec {
  int members = 5;
  double loading_min = 0.8, loading_max = 1.2;
  double noise = 0.2;  // idiosyncratic scale, relative to the step volatility
};

struct PairSpec {
  double rho = 0.5;    // spread AR(1) coefficient
  double noise = 1.0;  // spread innovation scale, relative to the step volatility
};

struct PlantedSpec {
  std::vector<ClusterSpec> clusters;
  std::vector<PairSpec> cointegrated_pairs;
  int independent_count = 0;
  std::size_t T = 2000;  // bars per entity
  std::uint64_t seed = 42;
  double step_vol = 0.01;      // per-bar log-return standard deviation
  double jitter_scale = 0.2;   // intra-bar jitter, relative to step_vol
  double start_price = 100.0;
  std::int64_t start_ms = 1672531200000;  // 2023-01-01T00:00:00Z
  std::int64_t interval_ms = 3600000;
  Tails tails = Tails::Gaussian;
  double t_dof = 5.0;

  int entity_count() const {
    int n = independent_count + 2 * static_cast<int>(cointegrated_pairs.size());
    for (const auto& c : clusters) n += c.members;
    return n;
  }
};

struct GroundTruth {
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::pair<std::string, std::string>> cointegrated_pairs;
  std::vector<std::string> independents;

  // Unordered within-cluster pairs, each as (smaller id, larger id).
  std::vector<std::pair<std::string, std::string>> within_cluster_pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& c : clusters)
      for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = a + 1; b < c.size(); ++b) out.push_back(std::minmax(c[a], c[b]));
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct Universe {
  std::vector<OhlcSeries> series;
  GroundTruth truth;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Unit-variance innovations.
class Innovations {
 public:
  Innovations(std::uint64_t seed, Tails tails, double dof)
      : rng_(seed), tails_(tails), t_(dof), t_scale_(dof > 2.0 ? std::sqrt((dof - 2.0) / dof) : 1.0) {}

  double operator()() { return tails_ == Tails::Gaussian ? normal_(rng_) : t_scale_ * t_(rng_); }

  std::vector<double> draw(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = (*this)();
    return v;
  }

 private:
  std::mt19937_64 rng_;
  Tails tails_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::student_t_distribution<double> t_;
  double t_scale_;
};

// Per-bar shocks of one entity: close-to-close return and the three intra-bar
// jitters (open, high, low), all in units of step_vol.
struct Shocks {
  std::vector<double> ret, j_open, j_high, j_low;

  static Shocks draw(Innovations& g, std::size_t T) {
    return {g.draw(T), g.draw(T), g.draw(T), g.draw(T)};
  }

  Shocks scaled(double a) const {
    Shocks s = *this;
    for (auto* v : {&s.ret, &s.j_open, &s.j_high, &s.j_low})
      for (auto& x : *v) x *= a;
    return s;
  }

  Shocks& add(const Shocks& o, double a) {
    for (std::size_t t = 0; t < ret.size(); ++t) {
      ret[t] += a * o.ret[t];
      j_open[t] += a * o.j_open[t];
      j_high[t] += a * o.j_high[t];
      j_low[t] += a * o.j_low[t];
    }
    return *this;
  }
};

// Builds bars from a log-close path and jitters:
//   open = previous close * exp(jitter), high/low widen max/min(open, close).
inline OhlcSeries make_bars(const std::string& id, const std::vector<double>& log_close, const Shocks& s,
                            const PlantedSpec& spec) {
  const double jv = spec.jitter_scale * spec.step_vol;
  OhlcSeries out;
  out.entity_id = id;
  for (std::size_t t = 0; t < log_close.size(); ++t) {
    const double lc = log_close[t];
    const double lo_open = (t == 0 ? lc : log_close[t - 1]) + jv * s.j_open[t];
    const double o = std::exp(lo_open), c = std::exp(lc);
    const double h = std::max(o, c) * std::exp(jv * std::abs(s.j_high[t]));
    const double l = std::min(o, c) * std::exp(-jv * std::abs(s.j_low[t]));
    out.push_back(spec.start_ms + static_cast<std::int64_t>(t) * spec.interval_ms, o, h, l, c);
  }
  return out;
}

inline std::vector<double> cumulate(double start_log, const std::vector<double>& steps, double scale) {
  std::vector<double> p(steps.size());
  double level = start_log;
  for (std::size_t t = 0; t < steps.size(); ++t) p[t] = (level += scale * steps[t]);
  return p;
}

inline std::string padded(int v) {
  return (v < 10 ? "0" : "") + std::to_string(v);
}

inline void check_length(std::size_t T, std::size_t min_T) {
  if (T < min_T) fail(ErrorCode::SpecInvalid, "series length must be at least " + std::to_string(min_T));
}

inline void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) fail(ErrorCode::InvalidRho, "rho must lie strictly inside (0, 1)");
}

}  // namespace detail

// Members share one factor path; member m's return is
// loading_m * factor + noise * eps_m, and so are its intra-bar jitters.
inline std::vector<OhlcSeries> gen_factor_cluster(const std::vector<std::string>& ids, const ClusterSpec& c,
                                                  const PlantedSpec& spec, std::uint64_t seed) {
  if (c.members < 2 || ids.size() != static_cast<std::size_t>(c.members))
    fail(ErrorCode::SpecInvalid, "a cluster needs at least 2 members");
  if (!(c.loading_min <= c.loading_max) || c.noise < 0.0)
    fail(ErrorCode::SpecInvalid, "cluster loading range or noise is invalid");
  detail::check_length(spec.T, 2);
  detail::Innovations fg(detail::derive_seed(seed, 0), spec.tails, spec.t_dof);
  const auto factor = detail::Shocks::draw(fg, spec.T);
  std::mt19937_64 lrng(detail::derive_seed(seed, 1));
  std::uniform_real_distribution<double> load(c.loading_min, c.loading_max);
  std::vector<OhlcSeries> out;
  for (int m = 0; m < c.members; ++m) {
    const double loading = c.loading_min == c.loading_max ? c.loading_min : load(lrng);
    detail::Innovations ig(detail::derive_seed(seed, 2, static_cast<std::uint64_t>(m)), spec.tails, spec.t_dof);
    auto s = factor.scaled(loading).add(detail::Shocks::draw(ig, spec.T), c.noise);
    const auto lc = detail::cumulate(std::log(spec.start_price), s.ret, spec.step_vol);
    out.push_back(detail::make_bars(ids[static_cast<std::size_t>(m)], lc, s, spec));
  }
  return out;
}

// x is a random walk in log price; y = x + u with u an AR(1) spread.
inline std::pair<OhlcSeries, OhlcSeries> gen_cointegrated_pair(const std::string& id_x, const std::string& id_y,
                                                               const PairSpec& p, const PlantedSpec& spec,
                                                               std::uint64_t seed) {
  detail::check_rho(p.rho);
  detail::check_length(spec.T, 500);
  if (!(p.noise > 0.0)) fail(ErrorCode::SpecInvalid, "spread noise must be positive");
  detail::Innovations gx(detail::derive_seed(seed, 0), spec.tails, spec.t_dof);
  detail::Innovations gu(detail::derive_seed(seed, 1), spec.tails, spec.t_dof);
  const auto sx = detail::Shocks::draw(gx, spec.T);
  const auto eps = gu.draw(spec.T);
  const auto lx = detail::cumulate(std::log(spec.start_price), sx.ret, spec.step_vol);
  std::vector<double> ly(spec.T);
  double u = 0.0;
  for (std::size_t t = 0; t < spec.T; ++t) {
    u = p.rho * u + p.noise * spec.step_vol * eps[t];
    ly[t] = lx[t] + u;
  }
  return {detail::make_bars(id_x, lx, sx, spec), detail::make_bars(id_y, ly, sx, spec)};
}

inline OhlcSeries gen_random_walk(const std::string& id, const PlantedSpec& spec, std::uint64_t seed) {
  detail::check_length(spec.T, 2);
  detail::Innovations g(detail::derive_seed(seed, 0), spec.tails, spec.t_dof);
  const auto s = detail::Shocks::draw(g, spec.T);
  return detail::make_bars(id, detail::cumulate(std::log(spec.start_price), s.ret, spec.step_vol), s, spec);
}

inline void validate(const PlantedSpec& spec) {
  if (spec.entity_count() < 2) fail(ErrorCode::SpecInvalid, "planted universe needs at least 2 entities");
  if (spec.independent_count < 0) fail(ErrorCode::SpecInvalid, "independent_count must be >= 0");
  for (const auto& c : spec.clusters)
    if (c.members < 2) fail(ErrorCode::SpecInvalid, "a cluster needs at least 2 members");
  for (const auto& p : spec.cointegrated_pairs) detail::check_rho(p.rho);
  detail::check_length(spec.T, spec.cointegrated_pairs.empty() ? 2 : 500);
  if (!(spec.step_vol > 0.0) || spec.jitter_scale < 0.0 || !(spec.start_price > 0.0) || spec.interval_ms <= 0)
    fail(ErrorCode::SpecInvalid, "step_vol, jitter_scale, start_price or interval_ms is invalid");
  if (spec.tails == Tails::StudentT && !(spec.t_dof > 2.0))
    fail(ErrorCode::SpecInvalid, "t_dof must exceed 2");
}

// Ids: C<k>_<mm> for cluster members, P<k>_X / P<k>_Y for pairs, I<kk> for
// independents. Each component draws from its own derived seed.
inline Universe gen_universe(const PlantedSpec& spec) {
  validate(spec);
  Universe u;
  std::uint64_t component = 0;
  for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
    std::vector<std::string> ids;
    for (int m = 0; m < spec.clusters[k].members; ++m)
      ids.push_back("C" + std::to_string(k) + "_" + detail::padded(m));
    for (auto& s : gen_factor_cluster(ids, spec.clusters[k], spec, detail::derive_seed(spec.seed, 100, component++)))
      u.series.push_back(std::move(s));
    u.truth.clusters.push_back(std::move(ids));
  }
  for (std::size_t k = 0; k < spec.cointegrated_pairs.size(); ++k) {
    const auto x = "P" + std::to_string(k) + "_X", y = "P" + std::to_string(k) + "_Y";
    auto [sx, sy] = gen_cointegrated_pair(x, y, spec.cointegrated_pairs[k], spec,
                                          detail::derive_seed(spec.seed, 100, component++));
    u.series.push_back(std::move(sx));
    u.series.push_back(std::move(sy));
    u.truth.cointegrated_pairs.emplace_back(x, y);
  }
  for (int k = 0; k < spec.independent_count; ++k) {
    const auto id = "I" + detail::padded(k);
    u.series.push_back(gen_random_walk(id, spec, detail::derive_seed(spec.seed, 100, component++)));
    u.truth.independents.push_back(id);
  }
  return u;
}

// ---- JSON --------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const GroundTruth& g) {
  nlohmann::ordered_json j;
  j["clusters"] = g.clusters;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [a, b] : g.cointegrated_pairs) pairs.push_back({a, b});
  j["cointegrated_pairs"] = std::move(pairs);
  j["independents"] = g.independents;
  return j;
}

inline GroundTruth ground_truth_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GroundTruth g;
    g.clusters = j.at("clusters").get<std::vector<std::vector<std::string>>>();
    for (const auto& p : j.at("cointegrated_pairs"))
      g.cointegrated_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    g.independents = j.at("independents").get<std::vector<std::string>>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SpecInvalid, std::string("ground truth JSON: ") + e.what());
  }
}

inline nlohmann::ordered_json to_json(const PlantedSpec& s) {
  nlohmann::ordered_json j;
  auto clusters = nlohmann::ordered_json::array();
  for (const auto& c : s.clusters)
    clusters.push_back({{"members", c.members},
                        {"loading_min", c.loading_min},
                        {"loading_max", c.loading_max},
                        {"noise", c.noise}});
  j["clusters"] = std::move(clusters);
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : s.cointegrated_pairs) pairs.push_back({{"rho", p.rho}, {"noise", p.noise}});
  j["cointegrated_pairs"] = std::move(pairs);
  j["independent_count"] = s.independent_count;
  j["T"] = s.T;
  j["seed"] = s.seed;
  j["step_vol"] = s.step_vol;
  j["jitter_scale"] = s.jitter_scale;
  j["start_price"] = s.start_price;
  j["start_ms"] = s.start_ms;
  j["interval_ms"] = s.interval_ms;
  j["tails"] = s.tails == Tails::Gaussian ? "gaussian" : "student_t";
  j["t_dof"] = s.t_dof;
  return j;
}

// Missing keys keep their defaults; unknown keys are rejected.
inline PlantedSpec planted_spec_from_json(std::string_view text) {
  static const std::vector<std::string> known = {"clusters", "cointegrated_pairs", "independent_count", "T",
                                                 "seed", "step_vol", "jitter_scale", "start_price",
                                                 "start_ms", "interval_ms", "tails", "t_dof"};
  PlantedSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(ErrorCode::SpecInvalid, "planted spec must be a JSON object");
    for (const auto& [k, v] : j.items())
      if (std::find(known.begin(), known.end(), k) == known.end())
        fail(ErrorCode::SpecInvalid, "unknown planted spec key " + k);
    for (const auto& c : j.value("clusters", nlohmann::json::array())) {
      ClusterSpec cs;
      cs.members = c.value("members", cs.members);
      cs.loading_min = c.value("loading_min", cs.loading_min);
      cs.loading_max = c.value("loading_max", cs.loading_max);
      cs.noise = c.value("noise", cs.noise);
      s.clusters.push_back(cs);
    }
    for (const auto& p : j.value("cointegrated_pairs", nlohmann::json::array())) {
      PairSpec ps;
      ps.rho = p.value("rho", ps.rho);
      ps.noise = p.value("noise", ps.noise);
      s.cointegrated_pairs.push_back(ps);
    }
    s.independent_count = j.value("independent_count", s.independent_count);
    s.T = j.value("T", s.T);
    s.seed = j.value("seed", s.seed);
    s.step_vol = j.value("step_vol", s.step_vol);
    s.jitter_scale = j.value("jitter_scale", s.jitter_scale);
    s.start_price = j.value("start_price", s.start_price);
    s.start_ms = j.value("start_ms", s.start_ms);
    s.interval_ms = j.value("interval_ms", s.interval_ms);
    const auto tails = j.value("tails", std::string("gaussian"));
    if (tails == "gaussian")
      s.tails = Tails::Gaussian;
    else if (tails == "student_t")
      s.tails = Tails::StudentT;
    else
      fail(ErrorCode::SpecInvalid, "tails must be 'gaussian' or 'student_t'");
    s.t_dof = j.value("t_dof", s.t_dof);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SpecInvalid, std::string("planted spec JSON: ") + e.what());
  }
  return s;
}

}  // namespace latsim

#endif  // LATSIM_SYNTH_HPP_
