#ifndef LATSIM_EMBEDDING_HPP_
#define LATSIM_EMBEDDING_HPP_

// Entity embeddings (mean of window latents) and their cosine similarity
// matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latsim/error.hpp"
#include "latsim/io.hpp"
#include "latsim/windowing.hpp"

namespace latsim {

struct EntityEmbedding {
  std::string entity_id;
  Eigen::VectorXd z;
  std::size_t K = 0;
};

struct SimilarityMatrix {
  std::vector<std::string> entity_ids;
  Eigen::MatrixXd S;
  // index pairs (i < j, or i == i for a zero embedding) whose cosine was
  // undefined and reported as 0
  std::vector<std::pair<std::size_t, std::size_t>> degenerate;

  std::size_t size() const { return entity_ids.size(); }
};

inline constexpr double kZeroNormEps = 1e-12;

inline EntityEmbedding aggregate(const std::string& entity_id,
                                 std::span<const Eigen::VectorXd> latents) {
  if (latents.empty()) fail(ErrorCode::EmptyLatentList, entity_id + ": no window latents");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(latents.front().size());
  for (const auto& h : latents) {
    if (h.size() != sum.size())
      fail(ErrorCode::DimensionMismatch, entity_id + ": latent vectors differ in length");
    sum += h;
  }
  return {entity_id, sum / static_cast<double>(latents.size()), latents.size()};
}

// Groups the rows of `latents` (one per window, aligned with batch.windows)
// by entity and averages each group. Output follows the batch's entity order.
inline std::vector<EntityEmbedding> aggregate_by_entity(const WindowBatch& batch,
                                                        const Eigen::MatrixXd& latents) {
  if (latents.rows() != static_cast<Eigen::Index>(batch.size()))
    fail(ErrorCode::DimensionMismatch, "latent row count does not match the window batch");
  std::vector<EntityEmbedding> out;
  std::vector<Eigen::VectorXd> group;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    group.push_back(latents.row(static_cast<Eigen::Index>(i)).transpose());
    const bool last = i + 1 == batch.size() ||
                      batch.windows[i + 1].entity_id != batch.windows[i].entity_id;
    if (last) {
      out.push_back(aggregate(batch.windows[i].entity_id, group));
      group.clear();
    }
  }
  return out;
}

struct CosineValue {
  double value = 0.0;
  bool degenerate = false;
};

inline CosineValue cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "cosine: vector lengths differ");
  const double na = a.norm(), nb = b.norm();
  if (na < kZeroNormEps || nb < kZeroNormEps) return {0.0, true};
  return {std::clamp(a.dot(b) / (na * nb), -1.0, 1.0), false};
}

inline SimilarityMatrix similarity_matrix(std::span<const EntityEmbedding> embeddings) {
  const auto n = embeddings.size();
  if (n < 2) fail(ErrorCode::DimensionMismatch, "need at least 2 embeddings");
  const auto k = embeddings.front().z.size();
  SimilarityMatrix m;
  m.S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& e : embeddings) {
    if (e.z.size() != k)
      fail(ErrorCode::DimensionMismatch, e.entity_id + ": embedding length " +
                                             std::to_string(e.z.size()) + " != " + std::to_string(k));
    m.entity_ids.push_back(e.entity_id);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (embeddings[i].z.norm() < kZeroNormEps)
      m.degenerate.emplace_back(i, i);
    else
      m.S(ii, ii) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto c = cosine(embeddings[i].z, embeddings[j].z);
      if (c.degenerate) m.degenerate.emplace_back(i, j);
      m.S(ii, jj) = m.S(jj, ii) = c.value;
    }
  }
  return m;
}

// entity_id,K,z_0,...,z_{k-1}
inline std::string embeddings_to_csv(std::span<const EntityEmbedding> embeddings) {
  std::string out = "entity_id,K";
  const auto k = embeddings.empty() ? 0 : embeddings.front().z.size();
  for (Eigen::Index i = 0; i < k; ++i) out += ",z_" + std::to_string(i);
  out += '\n';
  for (const auto& e : embeddings) {
    out += e.entity_id + ',' + std::to_string(e.K);
    for (Eigen::Index i = 0; i < e.z.size(); ++i) out += ',' + io::format_double(e.z(i));
    out += '\n';
  }
  return out;
}

inline std::vector<EntityEmbedding> embeddings_from_csv(std::string_view text) {
  std::vector<EntityEmbedding> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = io::split(line);
    if (f.size() < 3) fail(ErrorCode::MalformedRow, "embeddings line " + std::to_string(line_no));
    EntityEmbedding e;
    e.entity_id = std::string(f[0]);
    const auto K = io::parse_int(f[1]);
    if (!K || *K < 1) fail(ErrorCode::MalformedRow, "embeddings line " + std::to_string(line_no));
    e.K = static_cast<std::size_t>(*K);
    e.z.resize(static_cast<Eigen::Index>(f.size() - 2));
    for (std::size_t i = 2; i < f.size(); ++i) {
      const auto v = io::parse_double(f[i]);
      if (!v) fail(ErrorCode::MalformedRow, "embeddings line " + std::to_string(line_no));
      e.z(static_cast<Eigen::Index>(i - 2)) = *v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

// Square matrix with entity ids as the first row and column.
inline std::string similarity_to_csv(const SimilarityMatrix& m) {
  std::string out = "entity";
  for (const auto& id : m.entity_ids) out += ',' + id;
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.entity_ids[i];
    for (std::size_t j = 0; j < m.size(); ++j)
      out += ',' + io::format_double(m.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out += '\n';
  }
  return out;
}

inline SimilarityMatrix similarity_from_csv(std::string_view text) {
  SimilarityMatrix m;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto f = io::split(line);
    if (line_no == 1) {
      for (std::size_t i = 1; i < f.size(); ++i) m.entity_ids.emplace_back(f[i]);
      continue;
    }
    if (f.size() != m.entity_ids.size() + 1 || f[0] != m.entity_ids[rows.size()])
      fail(ErrorCode::MalformedRow, "similarity line " + std::to_string(line_no));
    std::vector<double> r;
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto v = io::parse_double(f[i]);
      if (!v) fail(ErrorCode::MalformedRow, "similarity line " + std::to_string(line_no));
      r.push_back(*v);
    }
    rows.push_back(std::move(r));
  }
  if (rows.size() != m.entity_ids.size() || rows.empty())
    fail(ErrorCode::MalformedRow, "similarity matrix is not square");
  const auto n = static_cast<Eigen::Index>(rows.size());
  m.S.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m.S(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// Long form i,j,s_ij over every ordered pair, for heat-map plotting.
inline std::string similarity_to_long_csv(const SimilarityMatrix& m) {
  std::string out = "i,j,s_ij\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      out += m.entity_ids[i] + ',' + m.entity_ids[j] + ',' +
             io::format_double(m.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + '\n';
  return out;
}

}  // namespace latsim

#endif  // LATSIM_EMBEDDING_HPP_
