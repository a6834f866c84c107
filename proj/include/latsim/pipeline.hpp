#ifndef LATSIM_PIPELINE_HPP_
#define LATSIM_PIPELINE_HPP_

// Stage glue shared by the CLI and the acceptance driver: run-directory
// layout, dataset loading, model training in the configured precision,
// entity embedding, and run manifests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latsim/autoencoder.hpp"
#include "latsim/checkpoint.hpp"
#include "latsim/config.hpp"
#include "latsim/embedding.hpp"
#include "latsim/error.hpp"
#include "latsim/graph.hpp"
#include "latsim/ingest.hpp"
#include "latsim/io.hpp"
#include "latsim/stability.hpp"
#include "latsim/synth.hpp"
#include "latsim/windowing.hpp"

#ifndef LATSIM_VERSION
#define LATSIM_VERSION "0.1.0"
#endif

namespace latsim {

inline constexpr const char* kToolVersion = LATSIM_VERSION;

// Fixed file names under the run directory.
namespace run_paths {
inline const std::filesystem::path kData = "data";
inline const std::filesystem::path kTruth = "data/truth.json";
inline const std::filesystem::path kSpec = "data/spec.json";
inline const std::filesystem::path kCheckpoint = "model/checkpoint.bin";
inline const std::filesystem::path kLossTrace = "model/loss_trace.csv";
inline const std::filesystem::path kEmbeddings = "embed/embeddings.csv";
inline const std::filesystem::path kSimilarity = "embed/similarity.csv";
inline const std::filesystem::path kSimilarityLong = "embed/similarity_long.csv";
inline const std::filesystem::path kGraphJson = "graph/graph.json";
inline const std::filesystem::path kGraphDot = "graph/graph.dot";
inline const std::filesystem::path kGraphEdges = "graph/edges.csv";
inline const std::filesystem::path kTopology = "graph/topology.json";
inline const std::filesystem::path kStability = "stability/stability.json";
inline const std::filesystem::path kSweep = "stability/sweep.csv";
inline const std::filesystem::path kEgResults = "diagnose/eg_results.csv";
inline const std::filesystem::path kDiagSummary = "diagnose/summary.json";
inline const std::filesystem::path kPlantedResults = "diagnose/planted_results.csv";
inline const std::filesystem::path kPlantedSummary = "diagnose/planted_summary.json";
inline const std::filesystem::path kCache = "cache";
inline const std::filesystem::path kReport = "report/report.json";
inline const std::filesystem::path kHeatmap = "report/heatmap.csv";
inline const std::filesystem::path kReportEdges = "report/edges.csv";
inline const std::filesystem::path kManifests = "manifests";
}  // namespace run_paths

// ---- dataset ----------------------------------------------------------------------

// Every <id>.csv under `dir`, sorted by id.
inline std::vector<OhlcSeries> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::IoError, "dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::IoError, "no CSV series in " + dir.string());
  std::vector<OhlcSeries> out;
  for (const auto& f : files) out.push_back(load_csv(f, f.stem().string()));
  return out;
}

inline void write_dataset(const std::filesystem::path& dir, const std::vector<OhlcSeries>& series) {
  for (const auto& s : series) write_csv(s, dir / (s.entity_id + ".csv"));
}

// Restricts every series to the timestamps present in all of them.
inline std::vector<OhlcSeries> align_common(const std::vector<OhlcSeries>& series) {
  if (series.empty()) return {};
  std::set<std::int64_t> common(series.front().timestamps.begin(), series.front().timestamps.end());
  for (std::size_t k = 1; k < series.size(); ++k) {
    std::set<std::int64_t> next;
    for (auto ts : series[k].timestamps)
      if (common.contains(ts)) next.insert(ts);
    common = std::move(next);
  }
  std::vector<OhlcSeries> out;
  for (const auto& s : series) {
    OhlcSeries a;
    a.entity_id = s.entity_id;
    for (std::size_t t = 0; t < s.size(); ++t)
      if (common.contains(s.timestamps[t])) a.push_back(s.timestamps[t], s.open[t], s.high[t], s.low[t], s.close[t]);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<ReturnSeries> returns_of(const std::vector<OhlcSeries>& series) {
  std::vector<ReturnSeries> out;
  for (const auto& s : series) out.push_back(log_returns(s));
  return out;
}

inline WindowBatch window_batch(const std::vector<ReturnSeries>& returns, const PipelineConfig& cfg) {
  return build_batch(returns, cfg.window_length, cfg.window_stride, cfg.norm);
}

// ---- model ------------------------------------------------------------------------

struct TrainedModel {
  ModelParams<double> params;  // widened to double for inference
  std::vector<double> epoch_loss;
  std::string checkpoint;      // serialized in the training precision
};

inline TrainedModel train_model(const WindowBatch& batch, const PipelineConfig& cfg, std::uint64_t seed,
                                const EpochCallback& on_epoch = {}) {
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "train: empty window batch");
  ModelShape shape = cfg.shape;
  shape.input_dim = batch.windows.front().values.cols();
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  CheckpointMeta meta{cfg.precision == "float" ? "float32" : "float64", cfg.window_length, tc, {}};
  TrainedModel m;
  if (cfg.precision == "float") {
    auto r = train<float>(batch, shape, tc, on_epoch);
    meta.epoch_loss = r.epoch_loss;
    m.checkpoint = serialize_checkpoint(r.params, meta);
    m.params = r.params.template cast<double>();
    m.epoch_loss = std::move(r.epoch_loss);
  } else {
    auto r = train<double>(batch, shape, tc, on_epoch);
    meta.epoch_loss = r.epoch_loss;
    m.checkpoint = serialize_checkpoint(r.params, meta);
    m.params = std::move(r.params);
    m.epoch_loss = std::move(r.epoch_loss);
  }
  return m;
}

inline std::vector<EntityEmbedding> embed_entities(const ModelParams<double>& params, const WindowBatch& batch) {
  return aggregate_by_entity(batch, encode_all(params, std::span<const Window>(batch.windows)));
}

// Window -> train -> embed -> cosine similarity on one data set.
inline SimilarityMatrix estimate_similarity(const std::vector<ReturnSeries>& returns, const PipelineConfig& cfg,
                                            std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  const auto batch = window_batch(returns, cfg);
  const auto model = train_model(batch, cfg, seed, on_epoch);
  return similarity_matrix(embed_entities(model.params, batch));
}

inline SimilarityGraph build_graph(const SimilarityMatrix& m, const PipelineConfig& cfg) {
  return cfg.graph_top_edges > 0 ? induce_top(m, cfg.graph_top_edges) : induce(m, cfg.graph_threshold);
}

// Block re-estimation on an aligned panel: equal blocks, per-block retraining
// and matched sparsity. The threshold sweep is left to the caller.
inline StabilityReport run_stability(const std::vector<OhlcSeries>& series, const PipelineConfig& cfg,
                                     const std::function<void(std::size_t, int, double)>& progress = {}) {
  const auto returns = returns_of(align_common(series));
  const auto rows = static_cast<std::size_t>(returns.front().values.rows());
  const auto spec = make_equal_blocks(rows, cfg.stability_blocks);
  StabilityOptions opt;
  opt.matched_edges = cfg.stability_matched_edges;
  opt.threshold = cfg.graph_threshold;
  opt.master_seed = cfg.seed();
  opt.seeding = cfg.seeding;
  opt.min_block_length = static_cast<std::size_t>(cfg.window_length);
  std::size_t block = 0;
  return block_reestimate(returns, spec, opt, [&](const std::vector<ReturnSeries>& data, std::uint64_t seed) {
    const auto b = block++;
    return estimate_similarity(data, cfg, seed, [&](int epoch, double loss) {
      if (progress) progress(b, epoch, loss);
    });
  });
}

// ---- planted-structure scoring ----------------------------------------------------

struct RecoveryScore {
  std::size_t planted = 0;    // within-cluster pairs in the truth
  std::size_t retained = 0;   // graph edges
  std::size_t hits = 0;       // graph edges that are planted within-cluster pairs
  double recall = 0.0;        // hits / planted
  double precision = 0.0;     // hits / retained
};

inline RecoveryScore score_recovery(const EdgeSet& edges, const std::vector<std::string>& nodes,
                                    const GroundTruth& truth) {
  std::set<std::pair<std::string, std::string>> planted;
  for (const auto& p : truth.within_cluster_pairs()) planted.insert(p);
  RecoveryScore s;
  s.planted = planted.size();
  s.retained = edges.size();
  for (const auto& [i, j] : edges) s.hits += planted.contains(std::minmax(nodes.at(i), nodes.at(j)));
  s.recall = s.planted ? static_cast<double>(s.hits) / static_cast<double>(s.planted) : 0.0;
  s.precision = s.retained ? static_cast<double>(s.hits) / static_cast<double>(s.retained) : 0.0;
  return s;
}

inline nlohmann::ordered_json to_json(const RecoveryScore& s) {
  return {{"planted_within_cluster_pairs", s.planted},
          {"retained_edges", s.retained},
          {"hits", s.hits},
          {"recall", s.recall},
          {"precision", s.precision}};
}

// ---- manifests --------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string config;  // canonical INI
  std::vector<std::filesystem::path> inputs, outputs;  // relative to the run directory
};

inline std::vector<std::filesystem::path> files_under(const std::filesystem::path& run_dir,
                                                      const std::filesystem::path& rel) {
  std::vector<std::filesystem::path> out;
  const auto root = run_dir / rel;
  if (std::filesystem::is_regular_file(root)) return {rel};
  if (!std::filesystem::is_directory(root)) return {};
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), run_dir));
  std::sort(out.begin(), out.end());
  return out;
}

// manifests/<command>.json with SHA-256 of every listed file. No clocks or
// absolute paths, so identical runs give identical manifests.
inline std::filesystem::path write_manifest(const std::filesystem::path& run_dir, const RunManifest& m) {
  auto hashes = [&](const std::vector<std::filesystem::path>& files) {
    auto sorted = files;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : sorted) {
      if (!std::filesystem::exists(run_dir / f)) fail(ErrorCode::IoError, "manifest: missing " + f.generic_string());
      arr.push_back({{"path", f.generic_string()}, {"sha256", io::sha256_file(run_dir / f)}});
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["tool_version"] = kToolVersion;
  j["seed"] = m.seed;
  j["deterministic"] = m.deterministic;
  j["config"] = m.config;
  j["inputs"] = hashes(m.inputs);
  j["outputs"] = hashes(m.outputs);
  const auto path = run_paths::kManifests / (m.command + ".json");
  io::write_file(run_dir / path, j.dump(2) + "\n");
  return path;
}

}  // namespace latsim

#endif  // LATSIM_PIPELINE_HPP_
