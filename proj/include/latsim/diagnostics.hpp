#ifndef LATSIM_DIAGNOSTICS_HPP_
#define LATSIM_DIAGNOSTICS_HPP_

// Engle-Granger cointegration diagnostics for candidate pairs: cointegrating
// regression, augmented Dickey-Fuller test on its residuals, and critical
// values calibrated by simulation under the independent-random-walk null.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "latsim/error.hpp"
#include "latsim/graph.hpp"
#include "latsim/ingest.hpp"
#include "latsim/io.hpp"

namespace latsim {

// ---- least squares -----------------------------------------------------------

struct OlsFit {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::VectorXd residuals;
  double r_squared = 0.0;
  double ssr = 0.0;
  double sst = 0.0;
};

// y = alpha + beta * x + e.
inline OlsFit ols(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size())
    fail(ErrorCode::LengthMismatch, "ols: y has " + std::to_string(y.size()) + " points, x has " +
                                        std::to_string(x.size()));
  if (y.size() < 3) fail(ErrorCode::SeriesTooShort, "ols: need at least 3 points");
  const auto n = static_cast<Eigen::Index>(y.size());
  // Copies give Eigen-aligned storage, so vectorized reductions do not depend
  // on where the caller's buffers happen to sit.
  const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const Eigen::VectorXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  if (X.maxCoeff() == X.minCoeff()) fail(ErrorCode::ConstantRegressor, "ols: regressor is constant");
  const double mx = X.mean(), my = Y.mean();
  const Eigen::ArrayXd dx = X.array() - mx, dy = Y.array() - my;
  OlsFit f;
  f.beta = (dx * dy).sum() / dx.square().sum();
  f.alpha = my - f.beta * mx;
  f.residuals = (dy - f.beta * dx).matrix();
  f.ssr = f.residuals.squaredNorm();
  f.sst = dy.square().sum();
  f.r_squared = f.sst > 0.0 ? 1.0 - f.ssr / f.sst : 1.0;
  return f;
}

struct LinearFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd std_err;
  double ssr = 0.0;
  Eigen::Index nobs = 0;
};

// General least squares via Householder QR. Rank-deficient designs are
// rejected rather than regularized.
inline LinearFit fit_linear(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const auto n = X.rows(), k = X.cols();
  if (y.size() != n) fail(ErrorCode::LengthMismatch, "fit_linear: row count mismatch");
  if (n <= k) fail(ErrorCode::SingularDesign, "fit_linear: not enough observations");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k)
    fail(ErrorCode::SingularDesign, "design matrix has rank " + std::to_string(qr.rank()) +
                                        " < " + std::to_string(k));
  LinearFit f;
  f.nobs = n;
  f.coef = qr.solve(y);
  f.ssr = (y - X * f.coef).squaredNorm();
  const double s2 = f.ssr / static_cast<double>(n - k);
  // (X'X)^-1 = P R^-1 R^-T P^T
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd diag_perm = Rinv.rowwise().squaredNorm();
  f.std_err.resize(k);
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index j = 0; j < k; ++j) f.std_err(perm(j)) = std::sqrt(s2 * diag_perm(j));
  return f;
}

// ---- augmented Dickey-Fuller --------------------------------------------------

enum class AdfRegression { None, Constant };

struct AdfResult {
  double statistic = 0.0;  // t-ratio on the lagged level
  int lags_used = 0;
  Eigen::Index n_obs = 0;
};

// Default lag bound floor(12 * (T / 100)^(1/4)).
inline int schwert_max_lags(std::size_t n) {
  return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace detail {

// Design for dy_t on [y_{t-1}, (1), dy_{t-1}, ..., dy_{t-lags}] over
// t = first..n-1, where `first` >= lags + 1.
inline void adf_design(std::span<const double> y, int lags, Eigen::Index first, bool constant,
                       Eigen::VectorXd& target, Eigen::MatrixXd& X) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const Eigen::Index rows = n - first;
  const Eigen::Index cols = 1 + (constant ? 1 : 0) + lags;
  target.resize(rows);
  X.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<std::size_t>(first + r);
    target(r) = y[t] - y[t - 1];
    Eigen::Index c = 0;
    X(r, c++) = y[t - 1];
    if (constant) X(r, c++) = 1.0;
    for (int l = 1; l <= lags; ++l) X(r, c++) = y[t - static_cast<std::size_t>(l)] - y[t - static_cast<std::size_t>(l) - 1];
  }
}

}  // namespace detail

// Lag order chosen by AIC over 0..max_lags on the common sample that allows
// max_lags, then the chosen model is refit on all available observations.
inline AdfResult adf(std::span<const double> series, int max_lags, AdfRegression regression) {
  if (max_lags < 0) fail(ErrorCode::ConfigInvalid, "adf: max_lags must be >= 0");
  if (series.size() <= static_cast<std::size_t>(max_lags) + 10)
    fail(ErrorCode::SeriesTooShort, "adf: series of length " + std::to_string(series.size()) +
                                        " is too short for " + std::to_string(max_lags) + " lags");
  const bool constant = regression == AdfRegression::Constant;
  const int base = constant ? 2 : 1;

  int best = 0;
  if (max_lags > 0) {
    Eigen::VectorXd target;
    Eigen::MatrixXd X;
    detail::adf_design(series, max_lags, max_lags + 1, constant, target, X);
    const Eigen::MatrixXd G = X.transpose() * X;
    const Eigen::VectorXd b = X.transpose() * target;
    const double yy = target.squaredNorm();
    const auto nobs = static_cast<double>(X.rows());
    double best_aic = std::numeric_limits<double>::infinity();
    for (int p = 0; p <= max_lags; ++p) {
      const int m = base + p;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(G.topLeftCorner(m, m));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
      const Eigen::VectorXd beta = ldlt.solve(b.head(m));
      const double ssr = yy - beta.dot(b.head(m));
      if (!(ssr > 0.0) || !std::isfinite(ssr)) continue;
      const double aic = nobs * std::log(ssr / nobs) + 2.0 * m;
      if (aic < best_aic) {
        best_aic = aic;
        best = p;
      }
    }
  }

  Eigen::VectorXd target;
  Eigen::MatrixXd X;
  detail::adf_design(series, best, best + 1, constant, target, X);
  const auto fit = fit_linear(target, X);
  if (!(fit.std_err(0) > 0.0))
    fail(ErrorCode::SingularDesign, "adf: zero standard error on the lagged level");
  return {fit.coef(0) / fit.std_err(0), best, fit.nobs};
}

// ---- critical values ------------------------------------------------------------

enum class NullModel {
  EngleGranger,  // residual ADF (no constant) after y ~ a + b x, x and y independent walks
  AdfConstant,   // ADF with constant on a single random walk
  AdfNone,       // ADF without deterministic terms on a single random walk
};

inline std::string_view to_string(NullModel m) {
  switch (m) {
    case NullModel::EngleGranger: return "eg";
    case NullModel::AdfConstant: return "adf_c";
    case NullModel::AdfNone: return "adf_n";
  }
  return "?";
}

// Lag bound: -1 means the Schwert rule at the series length.
struct LagPolicy {
  int fixed = -1;

  int max_lags(std::size_t n) const { return fixed >= 0 ? fixed : schwert_max_lags(n); }
  std::string label() const { return fixed >= 0 ? "fixed" + std::to_string(fixed) : "schwert"; }
};

inline LagPolicy parse_lag_policy(std::string_view s) {
  if (s == "schwert") return {};
  if (auto v = io::parse_int(s); v && *v >= 0) return {static_cast<int>(*v)};
  fail(ErrorCode::ConfigInvalid, "diag.max_lags_policy must be 'schwert' or a non-negative integer");
}

struct CriticalValues {
  std::size_t T = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  NullModel model = NullModel::EngleGranger;
  std::string lag_policy = "schwert";
  double cv90 = 0.0, cv95 = 0.0, cv99 = 0.0;

  double at(double confidence) const {
    if (std::abs(confidence - 0.90) < 1e-12) return cv90;
    if (std::abs(confidence - 0.95) < 1e-12) return cv95;
    if (std::abs(confidence - 0.99) < 1e-12) return cv99;
    fail(ErrorCode::ConfigInvalid, "confidence must be one of 0.90, 0.95, 0.99");
  }
};

inline std::vector<double> random_walk(std::size_t T, std::mt19937_64& rng) {
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> w(T);
  double level = 0.0;
  for (auto& v : w) v = (level += step(rng));
  return w;
}

// One draw of the test statistic for `model` on fresh null data.
inline double null_statistic(NullModel model, std::size_t T, const LagPolicy& lags,
                             std::mt19937_64& rng) {
  switch (model) {
    case NullModel::EngleGranger: {
      const auto x = random_walk(T, rng);
      const auto y = random_walk(T, rng);
      const auto fit = ols(y, x);
      return adf(std::span<const double>(fit.residuals.data(), T), lags.max_lags(T), AdfRegression::None)
          .statistic;
    }
    case NullModel::AdfConstant:
    case NullModel::AdfNone: {
      const auto y = random_walk(T, rng);
      return adf(y, lags.max_lags(T),
                 model == NullModel::AdfConstant ? AdfRegression::Constant : AdfRegression::None)
          .statistic;
    }
  }
  return 0.0;
}

// Seed for trial `trial` of a calibration run, independent of thread layout.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
  return out[0];
}

// Linear interpolation between order statistics at position q * (n - 1).
inline double empirical_quantile(std::vector<double> sorted_or_not, double q) {
  auto& v = sorted_or_not;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<double> simulate_null(NullModel model, std::size_t T, std::size_t trials,
                                         std::uint64_t seed, const LagPolicy& lags = {},
                                         unsigned threads = 0) {
  std::vector<double> stats(trials);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(trials, 1)));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (auto i = begin; i < end; ++i) {
      std::mt19937_64 rng(trial_seed(seed, i));
      stats[i] = null_statistic(model, T, lags, rng);
    }
  };
  if (threads <= 1) {
    work(0, trials);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (trials + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const auto b = std::min(trials, t * chunk), e = std::min(trials, (t + 1) * chunk);
      pool.emplace_back(work, b, e);
    }
  }
  return stats;
}

inline CriticalValues calibrate_critical_values(std::size_t T, std::size_t trials, std::uint64_t seed,
                                                NullModel model = NullModel::EngleGranger,
                                                const LagPolicy& lags = {}) {
  if (trials < 100) fail(ErrorCode::ConfigInvalid, "calibration needs at least 100 trials");
  const auto stats = simulate_null(model, T, trials, seed, lags);
  CriticalValues cv{T, trials, seed, model, lags.label()};
  cv.cv99 = empirical_quantile(stats, 0.01);
  cv.cv95 = empirical_quantile(stats, 0.05);
  cv.cv90 = empirical_quantile(stats, 0.10);
  return cv;
}

inline nlohmann::ordered_json to_json(const CriticalValues& cv) {
  return {{"T", cv.T},           {"trials", cv.trials}, {"seed", cv.seed},
          {"model", std::string(to_string(cv.model))}, {"lag_policy", cv.lag_policy},
          {"cv90", cv.cv90},     {"cv95", cv.cv95},     {"cv99", cv.cv99}};
}

inline std::filesystem::path critical_value_cache_path(const std::filesystem::path& dir, NullModel model,
                                                       std::size_t T, std::size_t trials,
                                                       std::uint64_t seed, const LagPolicy& lags) {
  return dir / ("cv_" + std::string(to_string(model)) + "_" + lags.label() + "_T" +
                std::to_string(T) + "_n" + std::to_string(trials) + "_s" + std::to_string(seed) +
                ".json");
}

// Calibrates once per (model, lag policy, T, trials, seed) and memoizes the
// table as JSON under `cache_dir`.
inline CriticalValues cached_critical_values(const std::filesystem::path& cache_dir, std::size_t T,
                                             std::size_t trials, std::uint64_t seed,
                                             NullModel model = NullModel::EngleGranger,
                                             const LagPolicy& lags = {}) {
  const auto path = critical_value_cache_path(cache_dir, model, T, trials, seed, lags);
  if (std::filesystem::exists(path)) {
    try {
      const auto j = nlohmann::json::parse(io::read_file(path));
      CriticalValues cv{j.at("T").get<std::size_t>(), j.at("trials").get<std::size_t>(),
                        j.at("seed").get<std::uint64_t>(), model,
                        j.at("lag_policy").get<std::string>()};
      cv.cv90 = j.at("cv90").get<double>();
      cv.cv95 = j.at("cv95").get<double>();
      cv.cv99 = j.at("cv99").get<double>();
      if (cv.T == T && cv.trials == trials && cv.seed == seed && cv.lag_policy == lags.label() &&
          j.at("model").get<std::string>() == to_string(model))
        return cv;
    } catch (const nlohmann::json::exception&) {
      // unreadable cache entry: recompute and overwrite
    }
  }
  auto cv = calibrate_critical_values(T, trials, seed, model, lags);
  io::write_file(path, to_json(cv).dump(2) + "\n");
  return cv;
}

// ---- Engle-Granger ----------------------------------------------------------------

struct EgResult {
  std::string entity_i, entity_j;
  std::string direction;  // "<dependent>~<regressor>"
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double critical_value = 0.0;
  bool cointegrated = false;
  bool degenerate_exact_fit = false;
};

inline constexpr std::size_t kMinEgLength = 100;

// Residual ADF statistic of dependent ~ regressor, or nullopt for an exact
// linear fit.
inline std::optional<double> eg_statistic(std::span<const double> dependent,
                                          std::span<const double> regressor, const LagPolicy& lags) {
  const auto fit = ols(dependent, regressor);
  if (fit.ssr <= 1e-24 * std::max(fit.sst, 1e-300) || fit.residuals.cwiseAbs().maxCoeff() == 0.0)
    return std::nullopt;
  return adf(std::span<const double>(fit.residuals.data(), static_cast<std::size_t>(fit.residuals.size())),
             lags.max_lags(dependent.size()), AdfRegression::None)
      .statistic;
}

// Both regression directions are tested; the pair is cointegrated when the
// more negative statistic is below the critical value.
inline EgResult engle_granger(const std::string& id_i, std::span<const double> series_i,
                              const std::string& id_j, std::span<const double> series_j,
                              double critical_value, const LagPolicy& lags = {}) {
  if (series_i.size() != series_j.size())
    fail(ErrorCode::LengthMismatch, id_i + "/" + id_j + ": series lengths differ");
  if (series_i.size() < kMinEgLength)
    fail(ErrorCode::SeriesTooShort, id_i + "/" + id_j + ": need at least " +
                                        std::to_string(kMinEgLength) + " observations");
  EgResult r{id_i, id_j};
  r.critical_value = critical_value;
  const auto ij = eg_statistic(series_i, series_j, lags);
  const auto ji = eg_statistic(series_j, series_i, lags);
  if (!ij || !ji) {
    r.degenerate_exact_fit = true;
    r.direction = !ij ? id_i + "~" + id_j : id_j + "~" + id_i;
    return r;
  }
  if (*ij <= *ji) {
    r.statistic = *ij;
    r.direction = id_i + "~" + id_j;
  } else {
    r.statistic = *ji;
    r.direction = id_j + "~" + id_i;
  }
  r.cointegrated = r.statistic < critical_value;
  return r;
}

struct DiagnosticsSummary {
  std::size_t tested = 0;
  std::size_t passed = 0;
  std::size_t degenerate = 0;
  double proportion = 0.0;
  bool empty = true;
};

inline DiagnosticsSummary summarize(std::span<const EgResult> results) {
  DiagnosticsSummary s;
  s.tested = results.size();
  s.empty = results.empty();
  for (const auto& r : results) {
    s.passed += r.cointegrated ? 1 : 0;
    s.degenerate += r.degenerate_exact_fit ? 1 : 0;
  }
  s.proportion = s.tested ? static_cast<double>(s.passed) / static_cast<double>(s.tested) : 0.0;
  return s;
}

// Log close prices of two series over their common timestamps.
inline std::pair<std::vector<double>, std::vector<double>> aligned_log_close(const OhlcSeries& a,
                                                                             const OhlcSeries& b) {
  std::pair<std::vector<double>, std::vector<double>> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.timestamps[i] < b.timestamps[j]) {
      ++i;
    } else if (b.timestamps[j] < a.timestamps[i]) {
      ++j;
    } else {
      out.first.push_back(std::log(a.close[i++]));
      out.second.push_back(std::log(b.close[j++]));
    }
  }
  return out;
}

// Supplies the critical value for a given aligned sample length.
using CriticalValueSource = std::function<double(std::size_t)>;

struct DiagnosticsReport {
  std::vector<EgResult> results;
  DiagnosticsSummary summary;
};

inline DiagnosticsReport diagnose_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                        const std::map<std::string, OhlcSeries>& prices,
                                        const CriticalValueSource& critical_value,
                                        const LagPolicy& lags = {}) {
  DiagnosticsReport rep;
  for (const auto& [a, b] : pairs) {
    const auto ia = prices.find(a);
    if (ia == prices.end()) fail(ErrorCode::MissingSeries, "no price series for " + a);
    const auto ib = prices.find(b);
    if (ib == prices.end()) fail(ErrorCode::MissingSeries, "no price series for " + b);
    const auto [xa, xb] = aligned_log_close(ia->second, ib->second);
    rep.results.push_back(engle_granger(a, xa, b, xb, critical_value(xa.size()), lags));
  }
  rep.summary = summarize(rep.results);
  return rep;
}

// Tests exactly the graph's edge set.
inline DiagnosticsReport diagnose_graph(const SimilarityGraph& g,
                                        const std::map<std::string, OhlcSeries>& prices,
                                        const CriticalValueSource& critical_value,
                                        const LagPolicy& lags = {}) {
  for (const auto& n : g.nodes)
    if (!prices.contains(n)) fail(ErrorCode::MissingSeries, "no price series for node " + n);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : g.edges) pairs.emplace_back(g.nodes[e.i], g.nodes[e.j]);
  return diagnose_pairs(pairs, prices, critical_value, lags);
}

// i,j,direction,stat,cv95,cointegrated
inline std::string eg_results_to_csv(std::span<const EgResult> results) {
  std::string out = "i,j,direction,stat,cv95,cointegrated\n";
  for (const auto& r : results) {
    out += r.entity_i + ',' + r.entity_j + ',' + r.direction + ',' +
           (r.degenerate_exact_fit ? std::string("degenerate") : io::format_double(r.statistic)) +
           ',' + io::format_double(r.critical_value) + ',' + (r.cointegrated ? "true" : "false") +
           '\n';
  }
  return out;
}

inline nlohmann::ordered_json to_json(const DiagnosticsSummary& s) {
  return {{"tested", s.tested},         {"passed", s.passed}, {"degenerate", s.degenerate},
          {"proportion", s.proportion}, {"empty", s.empty}};
}

}  // namespace latsim

#endif  // LATSIM_DIAGNOSTICS_HPP_
