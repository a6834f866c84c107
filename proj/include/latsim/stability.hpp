#ifndef LATSIM_STABILITY_HPP_
#define LATSIM_STABILITY_HPP_

// Robustness of the discovered network: agreement between graphs re-estimated
// on contiguous time blocks, persistent (core) edges, and threshold sweeps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latsim/embedding.hpp"
#include "latsim/error.hpp"
#include "latsim/graph.hpp"
#include "latsim/ingest.hpp"
#include "latsim/io.hpp"

namespace latsim {

inline double jaccard(const EdgeSet& a, const EdgeSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& e : a) inter += b.count(e);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

namespace detail {

// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline std::vector<double> upper_triangle(const Eigen::MatrixXd& S) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    for (Eigen::Index j = i + 1; j < S.cols(); ++j) out.push_back(S(i, j));
  return out;
}

}  // namespace detail

// Spearman correlation of the strict upper triangles.
inline double rank_corr(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  if (a.S.rows() != b.S.rows() || a.S.cols() != b.S.cols() || a.S.rows() != a.S.cols())
    fail(ErrorCode::DimensionMismatch, "rank_corr: matrices differ in shape");
  if (a.entity_ids != b.entity_ids)
    fail(ErrorCode::DimensionMismatch, "rank_corr: entity ordering differs");
  if (a.S.rows() < 3) fail(ErrorCode::DimensionMismatch, "rank_corr: need at least 3 entities");
  const auto ra = detail::average_ranks(detail::upper_triangle(a.S));
  const auto rb = detail::average_ranks(detail::upper_triangle(b.S));
  const auto n = static_cast<Eigen::Index>(ra.size());
  const Eigen::ArrayXd x = Eigen::Map<const Eigen::ArrayXd>(ra.data(), n);
  const Eigen::ArrayXd y = Eigen::Map<const Eigen::ArrayXd>(rb.data(), n);
  const Eigen::ArrayXd dx = x - x.mean(), dy = y - y.mean();
  const double sxx = dx.square().sum(), syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::DegenerateInput, "rank_corr: similarity triangle is constant");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Edges present in strictly more than half of the graphs.
inline EdgeSet core_edges(const std::vector<SimilarityGraph>& graphs) {
  std::map<EdgeKey, std::size_t> count;
  for (const auto& g : graphs)
    for (const auto& e : g.edges) ++count[{e.i, e.j}];
  EdgeSet core;
  for (const auto& [k, c] : count)
    if (2 * c > graphs.size()) core.insert(k);
  return core;
}

struct SweepRow {
  double threshold = 0.0;
  std::size_t edge_count = 0;
  std::size_t component_count = 0;
  std::size_t largest_component_size = 0;
  std::vector<std::size_t> top_hub_degrees;  // up to 3, descending
};

inline std::vector<SweepRow> threshold_sweep(const SimilarityMatrix& m, const std::vector<double>& thresholds) {
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] >= -1.0 && thresholds[k] <= 1.0))
      fail(ErrorCode::ConfigInvalid, "sweep thresholds must lie in [-1, 1]");
    if (k > 0 && thresholds[k] < thresholds[k - 1])
      fail(ErrorCode::ConfigInvalid, "sweep thresholds must be ascending");
  }
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    const auto g = induce(m, t);
    const auto top = topology(g);
    SweepRow r{t, top.edge_count, top.component_count, top.largest_component_size, {}};
    for (std::size_t h = 0; h < top.hubs.size() && h < 3; ++h) r.top_hub_degrees.push_back(top.degree[top.hubs[h]]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// threshold,edge_count,component_count,largest_component,hub1,hub2,hub3
inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "threshold,edge_count,component_count,largest_component,hub1,hub2,hub3\n";
  for (const auto& r : rows) {
    out += io::format_double(r.threshold) + ',' + std::to_string(r.edge_count) + ',' +
           std::to_string(r.component_count) + ',' + std::to_string(r.largest_component_size);
    for (std::size_t h = 0; h < 3; ++h)
      out += ',' + (h < r.top_hub_degrees.size() ? std::to_string(r.top_hub_degrees[h]) : std::string("0"));
    out += '\n';
  }
  return out;
}

// ---- temporal blocks -------------------------------------------------------

struct BlockSpec {
  std::vector<std::pair<std::size_t, std::size_t>> boundaries;  // [begin, end) row ranges

  std::size_t block_count() const { return boundaries.size(); }
};

// B contiguous blocks of near-equal length covering rows [0, n); earlier
// blocks take the remainder.
inline BlockSpec make_equal_blocks(std::size_t n, std::size_t blocks) {
  if (blocks < 2) fail(ErrorCode::ConfigInvalid, "stability.blocks must be >= 2");
  if (n < blocks) fail(ErrorCode::BlockTooShort, "fewer rows than blocks");
  BlockSpec spec;
  std::size_t begin = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t len = n / blocks + (b < n % blocks ? 1 : 0);
    spec.boundaries.emplace_back(begin, begin + len);
    begin += len;
  }
  return spec;
}

inline void validate(const BlockSpec& spec, std::size_t n, std::size_t min_length) {
  if (spec.block_count() < 2) fail(ErrorCode::ConfigInvalid, "block spec needs at least 2 blocks");
  std::size_t prev_end = 0;
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const auto [begin, end] = spec.boundaries[b];
    if (begin != prev_end || end <= begin || end > n)
      fail(ErrorCode::ConfigInvalid, "block " + std::to_string(b) + " is not contiguous with its predecessor");
    if (end - begin < min_length)
      fail(ErrorCode::BlockTooShort, "block " + std::to_string(b) + " has " + std::to_string(end - begin) +
                                         " rows, needs " + std::to_string(min_length));
    prev_end = end;
  }
  if (prev_end != n) fail(ErrorCode::ConfigInvalid, "blocks do not cover the study period");
}

// Rows [begin, end) of every series. Series must share one timeline.
inline std::vector<ReturnSeries> slice_rows(const std::vector<ReturnSeries>& data, std::size_t begin,
                                            std::size_t end) {
  std::vector<ReturnSeries> out;
  for (const auto& s : data) {
    ReturnSeries r;
    r.entity_id = s.entity_id;
    r.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        s.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    r.values = s.values.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    out.push_back(std::move(r));
  }
  return out;
}

enum class BlockSeeding { PerBlock, Shared };

inline BlockSeeding parse_block_seeding(std::string_view s) {
  if (s == "per_block") return BlockSeeding::PerBlock;
  if (s == "shared") return BlockSeeding::Shared;
  fail(ErrorCode::ConfigInvalid, "stability.seeding must be 'per_block' or 'shared'");
}

// Window -> train -> embed -> similarity on one block's data with one seed.
using SimilarityEstimator =
    std::function<SimilarityMatrix(const std::vector<ReturnSeries>& block, std::uint64_t seed)>;

struct StabilityOptions {
  std::size_t matched_edges = 0;  // 0: edge count of block 0 at `threshold`
  double threshold = 0.90;
  std::uint64_t master_seed = 42;
  BlockSeeding seeding = BlockSeeding::PerBlock;
  std::size_t min_block_length = 1;
};

struct StabilityReport {
  BlockSpec blocks;
  std::vector<std::uint64_t> seeds;
  std::vector<SimilarityMatrix> similarity;
  std::vector<SimilarityGraph> graphs;
  std::size_t matched_edges = 0;
  Eigen::MatrixXd jaccard;
  Eigen::MatrixXd rank_correlation;  // NaN where a triangle was constant
  EdgeSet core;
  std::vector<SweepRow> sweep;
};

inline void fill_agreement(StabilityReport& r) {
  const auto B = static_cast<Eigen::Index>(r.graphs.size());
  r.jaccard = Eigen::MatrixXd::Identity(B, B);
  r.rank_correlation = Eigen::MatrixXd::Identity(B, B);
  for (Eigen::Index a = 0; a < B; ++a)
    for (Eigen::Index b = a + 1; b < B; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      r.jaccard(a, b) = r.jaccard(b, a) = jaccard(r.graphs[ua].edge_set(), r.graphs[ub].edge_set());
      double rho = std::numeric_limits<double>::quiet_NaN();
      try {
        rho = rank_corr(r.similarity[ua], r.similarity[ub]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
      r.rank_correlation(a, b) = r.rank_correlation(b, a) = rho;
    }
  r.core = core_edges(r.graphs);
}

// Re-runs the estimator per block and sparsifies every block graph to the
// same edge count.
inline StabilityReport block_reestimate(const std::vector<ReturnSeries>& data, const BlockSpec& spec,
                                        const StabilityOptions& opt, const SimilarityEstimator& estimate) {
  if (data.empty()) fail(ErrorCode::EmptyBatch, "stability: no series");
  const auto n = static_cast<std::size_t>(data.front().values.rows());
  for (const auto& s : data)
    if (s.timestamps != data.front().timestamps)
      fail(ErrorCode::DimensionMismatch, "stability: series " + s.entity_id + " is not on the common timeline");
  validate(spec, n, opt.min_block_length);

  StabilityReport r;
  r.blocks = spec;
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const auto seed = opt.seeding == BlockSeeding::PerBlock ? opt.master_seed + b : opt.master_seed;
    r.seeds.push_back(seed);
    const auto [begin, end] = spec.boundaries[b];
    r.similarity.push_back(estimate(slice_rows(data, begin, end), seed));
  }
  r.matched_edges = opt.matched_edges ? opt.matched_edges : induce(r.similarity.front(), opt.threshold).edges.size();
  for (const auto& m : r.similarity) r.graphs.push_back(induce_top(m, r.matched_edges));
  fill_agreement(r);
  return r;
}

inline nlohmann::ordered_json to_json(const StabilityReport& r, const std::vector<std::string>& nodes) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (std::isfinite(m(i, j)))
          row.push_back(m(i, j));
        else
          row.push_back(nullptr);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::ordered_json j;
  auto blocks = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < r.blocks.block_count(); ++b)
    blocks.push_back({{"index", b},
                      {"begin", r.blocks.boundaries[b].first},
                      {"end", r.blocks.boundaries[b].second},
                      {"seed", r.seeds.at(b)},
                      {"edge_count", r.graphs.at(b).edges.size()},
                      {"threshold", r.graphs.at(b).threshold}});
  j["blocks"] = std::move(blocks);
  j["matched_edges"] = r.matched_edges;
  j["pairwise_jaccard"] = matrix(r.jaccard);
  j["rank_correlation"] = matrix(r.rank_correlation);
  auto core = nlohmann::ordered_json::array();
  for (const auto& [a, b] : r.core) core.push_back({nodes.at(a), nodes.at(b)});
  j["core_edges"] = std::move(core);
  auto sweep = nlohmann::ordered_json::array();
  for (const auto& s : r.sweep)
    sweep.push_back({{"threshold", s.threshold},
                     {"edge_count", s.edge_count},
                     {"component_count", s.component_count},
                     {"largest_component_size", s.largest_component_size},
                     {"top_hub_degrees", s.top_hub_degrees}});
  j["sweep"] = std::move(sweep);
  return j;
}

}  // namespace latsim

#endif  // LATSIM_STABILITY_HPP_
