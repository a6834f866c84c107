#ifndef LATSIM_WINDOWING_HPP_
#define LATSIM_WINDOWING_HPP_

// Overlapping fixed-length windows with per-window, per-column normalization,
// pooled across entities into one training batch.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "latsim/error.hpp"
#include "latsim/ingest.hpp"

namespace latsim {

enum class WindowNorm { ZScore, MinMax };

inline WindowNorm parse_window_norm(std::string_view s) {
  if (s == "zscore") return WindowNorm::ZScore;
  if (s == "minmax") return WindowNorm::MinMax;
  fail(ErrorCode::ConfigInvalid, "window.norm must be zscore or minmax, got '" + std::string(s) + "'");
}

struct Window {
  std::string entity_id;
  std::size_t window_index = 0;
  Eigen::MatrixXd values;  // L x d
};

struct SkippedSeries {
  std::string entity_id;
  Eigen::Index length;
};

struct WindowBatch {
  std::vector<Window> windows;
  std::map<std::string, std::size_t> counts;  // K_i per entity
  std::vector<SkippedSeries> skipped;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

inline constexpr double kConstantColumnEps = 1e-12;

inline std::size_t window_count(Eigen::Index length, Eigen::Index L, Eigen::Index stride) {
  if (length < L) return 0;
  return static_cast<std::size_t>((length - L) / stride + 1);
}

// Raw L x d slices starting at 0, stride, 2*stride, ...
inline std::vector<Eigen::MatrixXd> segment(const Eigen::MatrixXd& series, Eigen::Index L,
                                            Eigen::Index stride) {
  if (L < 2) fail(ErrorCode::ConfigInvalid, "window length must be >= 2");
  if (stride < 1) fail(ErrorCode::ConfigInvalid, "window stride must be >= 1");
  if (series.rows() < L)
    fail(ErrorCode::SeriesTooShort, "series of length " + std::to_string(series.rows()) +
                                        " is shorter than window length " + std::to_string(L));
  std::vector<Eigen::MatrixXd> out;
  out.reserve(window_count(series.rows(), L, stride));
  for (Eigen::Index start = 0; start + L <= series.rows(); start += stride)
    out.emplace_back(series.middleRows(start, L));
  return out;
}

inline std::vector<Eigen::MatrixXd> segment(const ReturnSeries& series, Eigen::Index L,
                                            Eigen::Index stride) {
  try {
    return segment(series.values, L, stride);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SeriesTooShort) fail(e.code(), series.entity_id + ": " + e.what());
    throw;
  }
}

// Column z-score with the L-1 denominator; near-constant columns become zero.
inline Eigen::MatrixXd znorm_window(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  const double n = static_cast<double>(raw.rows());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const double mean = raw.col(c).mean();
    const Eigen::ArrayXd centered = raw.col(c).array() - mean;
    const double sd = raw.rows() > 1 ? std::sqrt(centered.square().sum() / (n - 1.0)) : 0.0;
    if (sd < kConstantColumnEps)
      out.col(c).setZero();
    else
      out.col(c) = centered / sd;
  }
  return out;
}

// Column rescale to [0, 1]; constant columns become zero.
inline Eigen::MatrixXd minmax_window(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const double lo = raw.col(c).minCoeff();
    const double range = raw.col(c).maxCoeff() - lo;
    if (range < kConstantColumnEps)
      out.col(c).setZero();
    else
      out.col(c) = (raw.col(c).array() - lo) / range;
  }
  return out;
}

inline Eigen::MatrixXd normalize_window(const Eigen::MatrixXd& raw, WindowNorm norm) {
  return norm == WindowNorm::ZScore ? znorm_window(raw) : minmax_window(raw);
}

// Pools normalized windows from every series long enough to yield one.
// Output order is entity id (lexicographic) then window index, independent
// of input order.
inline WindowBatch build_batch(const std::vector<ReturnSeries>& all_series, Eigen::Index L,
                               Eigen::Index stride, WindowNorm norm = WindowNorm::ZScore) {
  std::vector<const ReturnSeries*> order;
  order.reserve(all_series.size());
  for (const auto& s : all_series) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const ReturnSeries* a, const ReturnSeries* b) { return a->entity_id < b->entity_id; });

  WindowBatch batch;
  for (const ReturnSeries* s : order) {
    if (s->length() < L) {
      batch.skipped.push_back({s->entity_id, s->length()});
      continue;
    }
    auto raws = segment(*s, L, stride);
    for (std::size_t w = 0; w < raws.size(); ++w)
      batch.windows.push_back({s->entity_id, w, normalize_window(raws[w], norm)});
    batch.counts[s->entity_id] += raws.size();
  }
  if (batch.windows.empty()) {
    std::string msg = "no series yields a window of length " + std::to_string(L);
    if (!batch.skipped.empty()) msg += " (" + std::to_string(batch.skipped.size()) + " skipped)";
    fail(ErrorCode::EmptyBatch, msg);
  }
  return batch;
}

}  // namespace latsim

#endif  // LATSIM_WINDOWING_HPP_
