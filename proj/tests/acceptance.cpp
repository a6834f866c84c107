// Acceptance driver. Each criterion prints one line:
//   criterion <n> PASS|FAIL <name>: <measurements> runtime=<s>s budget=<s>s
// and the process exits non-zero if any selected criterion fails.
//
//   acceptance --criterion 3     run one criterion
//   acceptance                   run all of them in order

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latsim/autoencoder.hpp"
#include "latsim/cli.hpp"
#include "latsim/diagnostics.hpp"
#include "latsim/embedding.hpp"
#include "latsim/graph.hpp"
#include "latsim/pipeline.hpp"
#include "latsim/stability.hpp"
#include "latsim/synth.hpp"
#include "test_util.hpp"

using namespace latsim;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets ------------------------------------------------

namespace pin {
// 1
constexpr double kGradRelErr = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr int kGradSeeds = 5;
// 2
constexpr int kSinusoidWindows = 2000;
constexpr double kLossRatio = 0.5;
// 3
constexpr int kEmbeddingSets = 200;
constexpr double kSymTol = 1e-12;
constexpr double kCosTol = 1e-12;
// 4
constexpr int kSweepMatrices = 100;
constexpr int kSweepPoints = 20;
// 5
constexpr int kRecoverySeeds = 3;
constexpr std::size_t kMatchedEdges = 20;
constexpr double kRecall = 0.8;
constexpr double kPrecision = 0.8;
constexpr double kLowNoise = 0.1;
constexpr int kRecoveryStride = 15;
// 6
constexpr std::size_t kAdfT = 1000;
constexpr std::size_t kNullTrials = 20000;
constexpr int kAdfSeries = 500;
constexpr double kSizeTarget = 0.05;
constexpr double kSizeTol = 0.02;
constexpr double kAdfPower = 0.95;
constexpr double kArRho = 0.5;
// 7
constexpr std::size_t kEgT = 2000;
constexpr int kEgPairs = 200;
constexpr double kEgPower = 0.90;
// 8
constexpr std::size_t kBlocks = 4;
constexpr double kCoreCoverage = 0.8;
constexpr int kStabilityStride = 4;
// 9
constexpr int kSmokeStride = 10;

constexpr double kBudget[11] = {0, 10, 300, 10, 10, 900, 300, 300, 1200, 3600, 3600};
}  // namespace pin

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// Universe of two low-noise five-member clusters and five independent walks.
PlantedSpec recovery_universe(std::uint64_t seed) {
  PlantedSpec s;
  ClusterSpec c;
  c.members = 5;
  c.noise = pin::kLowNoise;
  s.clusters = {c, c};
  s.independent_count = 5;
  s.T = 2000;
  s.seed = seed;
  return s;
}

// ---- 1 ----------------------------------------------------------------------------

Outcome gradient_check() {
  const ModelShape shape{.input_dim = 2, .hidden = 5, .latent = 3};
  double worst = 0.0;
  std::string worst_group;
  for (int s = 1; s <= pin::kGradSeeds; ++s) {
    const auto windows = testing_util::random_windows(3, 4, 2, 100 + s);
    auto p = init_params<double>(shape, s);
    std::mt19937_64 rng(s + 7);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    ModelParams<double>::zip(
        [&](const std::string&, auto& t) {
          if (t.cols() == 1)
            for (Eigen::Index i = 0; i < t.size(); ++i) t(i) += u(rng);
        },
        p);
    // central differences straddling the ReLU kink are not derivatives
    p.latent_b.setConstant(0.5);
    const auto analytic = loss_and_gradient<double>(windows, p);
    for (const auto& [name, err] : testing_util::finite_difference_check(windows, p, analytic.grad, pin::kFdStep)) {
      if (err > worst) {
        worst = err;
        worst_group = name;
      }
    }
  }
  return {worst < pin::kGradRelErr, "max_rel_err=" + fmt(worst, 3) + " (" + worst_group + ") over " +
                                        std::to_string(pin::kGradSeeds) + " seeds, limit " + fmt(pin::kGradRelErr)};
}

// ---- 2 ----------------------------------------------------------------------------

Outcome training_sanity() {
  const auto cfg = make_config();
  const auto windows = testing_util::sinusoid_windows(pin::kSinusoidWindows, cfg.window_length, 4, 2024);
  ModelShape shape = cfg.shape;
  shape.input_dim = 4;
  const std::span<const Eigen::MatrixXd> span(windows);
  const auto a = train<float>(span, shape, cfg.train);
  const auto b = train<float>(span, shape, cfg.train);
  const double ratio = a.epoch_loss.back() / a.epoch_loss.front();
  const bool identical = a.epoch_loss == b.epoch_loss;
  return {ratio < pin::kLossRatio && identical,
          "first=" + fmt(a.epoch_loss.front()) + " last=" + fmt(a.epoch_loss.back()) + " ratio=" + fmt(ratio) +
              " (limit " + fmt(pin::kLossRatio) + "), rerun bit-identical=" + (identical ? "yes" : "no")};
}

// ---- 3 ----------------------------------------------------------------------------

Outcome similarity_invariants() {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> n_dist(2, 40), k_dist(1, 64);
  std::uniform_real_distribution<double> log_scale(-6.0, 6.0);
  double sym = 0.0, diag = 0.0, bound = 0.0, oracle = 0.0, scale = 0.0;
  for (int s = 0; s < pin::kEmbeddingSets; ++s) {
    const int n = n_dist(rng), k = k_dist(rng);
    const bool nonnegative = s % 2 == 1;  // encoder outputs are ReLU codes
    std::vector<EntityEmbedding> e, scaled;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd z(k);
      for (int c = 0; c < k; ++c) z(c) = nonnegative ? std::abs(g(rng)) : g(rng);
      e.push_back({"e" + std::to_string(i), z, 1});
      scaled.push_back({"e" + std::to_string(i), z * std::exp(log_scale(rng)), 1});
    }
    const auto S = similarity_matrix(e).S;
    const auto S2 = similarity_matrix(scaled).S;
    for (int i = 0; i < n; ++i) {
      diag = std::max(diag, std::abs(S(i, i) - 1.0));
      for (int j = 0; j < n; ++j) {
        sym = std::max(sym, std::abs(S(i, j) - S(j, i)));
        bound = std::max(bound, std::max(S(i, j) - 1.0, -1.0 - S(i, j)));
        long double dot = 0, ni = 0, nj = 0;
        for (int c = 0; c < k; ++c) {
          dot += static_cast<long double>(e[i].z(c)) * e[j].z(c);
          ni += static_cast<long double>(e[i].z(c)) * e[i].z(c);
          nj += static_cast<long double>(e[j].z(c)) * e[j].z(c);
        }
        const double ref = static_cast<double>(dot / std::sqrt(ni * nj));
        oracle = std::max(oracle, std::abs(S(i, j) - ref));
        scale = std::max(scale, std::abs(S(i, j) - S2(i, j)));
      }
    }
  }
  const bool ok = sym < pin::kSymTol && diag < pin::kCosTol && bound <= 0.0 && oracle < pin::kCosTol &&
                  scale < pin::kCosTol;
  return {ok, std::to_string(pin::kEmbeddingSets) + " sets: max|S-S^T|=" + fmt(sym, 3) + " max|diag-1|=" +
                  fmt(diag, 3) + " bound_excess=" + fmt(std::max(bound, 0.0), 3) + " max|S-oracle|=" +
                  fmt(oracle, 3) + " max|S(cz)-S(z)|=" + fmt(scale, 3)};
}

// ---- 4 ----------------------------------------------------------------------------

std::size_t oracle_components(const Eigen::MatrixXd& S, double tau) {
  const auto n = S.rows();
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (seen[r]) continue;
    ++count;
    std::vector<Eigen::Index> stack{r};
    seen[r] = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (Eigen::Index v = 0; v < n; ++v)
        if (v != u && !seen[v] && S(u, v) >= tau) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
  }
  return count;
}

Outcome graph_monotonicity() {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> n_dist(3, 40);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int edge_violations = 0, comp_violations = 0, oracle_mismatch = 0;
  for (int m = 0; m < pin::kSweepMatrices; ++m) {
    const int n = n_dist(rng);
    SimilarityMatrix sm;
    sm.S = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      sm.entity_ids.push_back("n" + std::to_string(i));
      for (int j = i + 1; j < n; ++j) sm.S(i, j) = sm.S(j, i) = u(rng);
    }
    std::vector<double> taus(pin::kSweepPoints);
    for (auto& t : taus) t = u(rng);
    std::sort(taus.begin(), taus.end());
    const auto rows = threshold_sweep(sm, taus);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::size_t edges = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges += sm.S(i, j) >= taus[r];
      oracle_mismatch +=
          rows[r].edge_count != edges || rows[r].component_count != oracle_components(sm.S, taus[r]);
      if (r > 0) {
        edge_violations += rows[r].edge_count > rows[r - 1].edge_count;
        comp_violations += rows[r].component_count < rows[r - 1].component_count;
      }
    }
  }
  return {edge_violations == 0 && comp_violations == 0 && oracle_mismatch == 0,
          std::to_string(pin::kSweepMatrices) + " matrices x " + std::to_string(pin::kSweepPoints) +
              " thresholds: edge-count increases=" + std::to_string(edge_violations) +
              " component-count decreases=" + std::to_string(comp_violations) +
              " oracle mismatches=" + std::to_string(oracle_mismatch)};
}

// ---- 5 ----------------------------------------------------------------------------

Outcome planted_recovery() {
  const auto cfg = with_override(make_config(), "window.stride", std::to_string(pin::kRecoveryStride));
  double recall = 0.0, precision = 0.0;
  std::string per_seed;
  for (int s = 1; s <= pin::kRecoverySeeds; ++s) {
    const auto u = gen_universe(recovery_universe(static_cast<std::uint64_t>(s)));
    const auto batch = window_batch(returns_of(u.series), cfg);
    const auto model = train_model(batch, cfg, static_cast<std::uint64_t>(s));
    const auto sim = similarity_matrix(embed_entities(model.params, batch));
    const auto g = induce_top(sim, pin::kMatchedEdges);
    const auto score = score_recovery(g.edge_set(), g.nodes, u.truth);
    recall += score.recall;
    precision += score.precision;
    per_seed += " seed" + std::to_string(s) + "=" + fmt(score.recall, 3) + "/" + fmt(score.precision, 3);
  }
  recall /= pin::kRecoverySeeds;
  precision /= pin::kRecoverySeeds;
  return {recall >= pin::kRecall && precision >= pin::kPrecision,
          "mean recall=" + fmt(recall, 3) + " precision=" + fmt(precision, 3) + " at m=" +
              std::to_string(pin::kMatchedEdges) + " (recall/precision" + per_seed + "); H=" +
              std::to_string(cfg.shape.hidden) + " k=" + std::to_string(cfg.shape.latent) +
              " stride=" + std::to_string(cfg.window_stride) + " noise=" + fmt(pin::kLowNoise)};
}

// ---- 6 ----------------------------------------------------------------------------

Outcome adf_size_power() {
  const LagPolicy lags;
  const auto cv = calibrate_critical_values(pin::kAdfT, pin::kNullTrials, 6060, NullModel::AdfConstant, lags);
  const int max_lags = lags.max_lags(pin::kAdfT);
  std::mt19937_64 rng(6161);
  std::normal_distribution<double> e(0.0, 1.0);
  int null_reject = 0, ar_reject = 0;
  for (int k = 0; k < pin::kAdfSeries; ++k) {
    const auto walk = random_walk(pin::kAdfT, rng);
    null_reject += adf(walk, max_lags, AdfRegression::Constant).statistic < cv.cv95;
    std::vector<double> ar(pin::kAdfT);
    double x = 0.0;
    for (auto& v : ar) v = (x = pin::kArRho * x + e(rng));
    ar_reject += adf(ar, max_lags, AdfRegression::Constant).statistic < cv.cv95;
  }
  const double size = static_cast<double>(null_reject) / pin::kAdfSeries;
  const double power = static_cast<double>(ar_reject) / pin::kAdfSeries;
  return {std::abs(size - pin::kSizeTarget) <= pin::kSizeTol && power >= pin::kAdfPower,
          "cv95=" + fmt(cv.cv95) + " (" + std::to_string(pin::kNullTrials) + " trials, T=" +
              std::to_string(pin::kAdfT) + ") size=" + fmt(size, 3) + " (target 0.05+-0.02) power(rho=0.5)=" +
              fmt(power, 3) + " (min " + fmt(pin::kAdfPower) + ")"};
}

// ---- 7 ----------------------------------------------------------------------------

Outcome eg_power() {
  const LagPolicy lags;
  const auto cv = calibrate_critical_values(pin::kEgT, pin::kNullTrials, 7070, NullModel::EngleGranger, lags);
  PlantedSpec spec;
  spec.T = pin::kEgT;
  PairSpec pair;
  pair.rho = 0.5;
  int coint = 0, spurious = 0;
  for (int k = 0; k < pin::kEgPairs; ++k) {
    const auto seed = static_cast<std::uint64_t>(70000 + k);
    const auto [x, y] = gen_cointegrated_pair("X", "Y", pair, spec, seed);
    const auto [lx, ly] = aligned_log_close(x, y);
    coint += engle_granger("X", lx, "Y", ly, cv.cv95, lags).cointegrated;
    const auto a = gen_random_walk("A", spec, seed * 2 + 1'000'000);
    const auto b = gen_random_walk("B", spec, seed * 2 + 1'000'001);
    const auto [la, lb] = aligned_log_close(a, b);
    spurious += engle_granger("A", la, "B", lb, cv.cv95, lags).cointegrated;
  }
  const double power = static_cast<double>(coint) / pin::kEgPairs;
  const double size = static_cast<double>(spurious) / pin::kEgPairs;
  return {power >= pin::kEgPower, "cv95=" + fmt(cv.cv95) + " power(rho=0.5,T=2000)=" + fmt(power, 3) + " (min " +
                                      fmt(pin::kEgPower) + "); two-direction size on independent walks=" +
                                      fmt(size, 3) + " (reported)"};
}

// ---- 8 ----------------------------------------------------------------------------

// The same returns block repeated `copies` times on a continuous clock.
std::vector<ReturnSeries> repeat_block(const std::vector<ReturnSeries>& block, std::size_t copies) {
  std::vector<ReturnSeries> out;
  for (const auto& s : block) {
    ReturnSeries r;
    r.entity_id = s.entity_id;
    const auto n = s.values.rows();
    r.values.resize(n * static_cast<Eigen::Index>(copies), s.values.cols());
    for (std::size_t c = 0; c < copies; ++c) r.values.middleRows(static_cast<Eigen::Index>(c) * n, n) = s.values;
    for (Eigen::Index t = 0; t < r.values.rows(); ++t) r.timestamps.push_back(1'000 + 3'600'000 * t);
    out.push_back(std::move(r));
  }
  return out;
}

Outcome stability_protocol() {
  // identical blocks, identical seeds
  const auto u = gen_universe(recovery_universe(8));
  const auto returns = returns_of(u.series);
  std::vector<ReturnSeries> head;
  for (const auto& r : returns) {
    ReturnSeries h{r.entity_id, {r.timestamps.begin(), r.timestamps.begin() + 400}, r.values.topRows(400)};
    head.push_back(std::move(h));
  }
  const auto small = make_config({{"model.hidden", "32"}, {"model.latent", "8"}, {"train.epochs", "5"}});
  StabilityOptions same;
  same.matched_edges = pin::kMatchedEdges;
  same.seeding = BlockSeeding::Shared;
  same.master_seed = 8;
  const auto repeated = repeat_block(head, pin::kBlocks);
  const auto self = block_reestimate(repeated, make_equal_blocks(repeated.front().values.rows(), pin::kBlocks), same,
                                     [&](const std::vector<ReturnSeries>& d, std::uint64_t seed) {
                                       return estimate_similarity(d, small, seed);
                                     });
  const double min_jaccard = self.jaccard.minCoeff();
  const double min_rank = self.rank_correlation.minCoeff();
  const bool self_ok = min_jaccard == 1.0 && min_rank == 1.0;

  // planted universe, per-block retraining
  const auto cfg = make_config({{"window.stride", std::to_string(pin::kStabilityStride)},
                                {"stability.blocks", std::to_string(pin::kBlocks)},
                                {"stability.matched_edges", std::to_string(pin::kMatchedEdges)},
                                {"train.seed", "8"}});
  const auto report = run_stability(u.series, cfg);
  std::set<std::pair<std::string, std::string>> core;
  const auto& nodes = report.similarity.front().entity_ids;
  for (const auto& [a, b] : report.core) core.insert(std::minmax(nodes[a], nodes[b]));
  const auto planted = u.truth.within_cluster_pairs();
  std::size_t covered = 0;
  for (const auto& p : planted) covered += core.contains(std::minmax(p.first, p.second));
  const double coverage = static_cast<double>(covered) / static_cast<double>(planted.size());
  std::string per_block;
  for (std::size_t b = 0; b < report.graphs.size(); ++b) {
    const auto s = score_recovery(report.graphs[b].edge_set(), report.graphs[b].nodes, u.truth);
    per_block += " b" + std::to_string(b) + "=" + fmt(s.recall, 3);
  }
  return {self_ok && coverage >= pin::kCoreCoverage,
          "identical blocks: min jaccard=" + fmt(min_jaccard) + " min rank corr=" + fmt(min_rank) +
              "; planted B=4: core edges=" + std::to_string(report.core.size()) + " covering " +
              std::to_string(covered) + "/" + std::to_string(planted.size()) + " within-cluster pairs (" +
              fmt(coverage, 3) + ", min " + fmt(pin::kCoreCoverage) + "); block recall" + per_block +
              "; H=" + std::to_string(cfg.shape.hidden) + " stride=" + std::to_string(cfg.window_stride)};
}

// ---- 9, 10 ------------------------------------------------------------------------

int run(const fs::path& dir, const std::vector<std::string>& args, std::string* err_out = nullptr) {
  std::vector<std::string> full{"latsim", "--out-dir", dir.string()};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_out) *err_out = err.str();
  return status;
}

const std::vector<std::string> kStages = {"train", "embed", "graph", "stability", "diagnose", "report"};

std::string run_pipeline(const fs::path& dir, const std::vector<std::string>& global, const fs::path& spec) {
  auto args = global;
  args.insert(args.end(), {"synth", "--spec", spec.string()});
  std::string err;
  if (run(dir, args, &err) != 0) return "synth: " + err;
  for (const auto& stage : kStages) {
    args = global;
    args.push_back(stage);
    if (run(dir, args, &err) != 0) return stage + ": " + err;
  }
  return {};
}

Outcome default_shape_smoke() {
  const auto dir = testing_util::temp_dir("acceptance_c9");
  PlantedSpec spec;
  spec.clusters = {ClusterSpec{}, ClusterSpec{}};
  spec.cointegrated_pairs = {PairSpec{}, PairSpec{}};
  spec.independent_count = 6;
  spec.T = 2000;
  io::write_file(dir / "spec.json", to_json(spec).dump(2));
  io::write_file(dir / "shape.ini", "[window]\nlength = 30\nstride = " + std::to_string(pin::kSmokeStride) +
                                        "\n[model]\nhidden = 256\nlatent = 64\n[train]\nbatch_size = 64\n");
  const auto run_dir = dir / "run";
  const auto failure = run_pipeline(run_dir, {"--config", (dir / "shape.ini").string()}, dir / "spec.json");
  if (!failure.empty()) return {false, "pipeline failed at " + failure};

  const auto sim = similarity_from_csv(io::read_file(run_dir / run_paths::kSimilarity));
  const auto topo = nlohmann::json::parse(io::read_file(run_dir / run_paths::kTopology));
  const auto stab = nlohmann::json::parse(io::read_file(run_dir / run_paths::kStability));
  const auto diag = nlohmann::json::parse(io::read_file(run_dir / run_paths::kDiagSummary));
  const auto ck = load_checkpoint(run_dir / run_paths::kCheckpoint);
  bool files = true;
  for (const auto& rel : {run_paths::kGraphJson, run_paths::kGraphDot, run_paths::kGraphEdges, run_paths::kSweep,
                          run_paths::kEgResults, run_paths::kReport, run_paths::kHeatmap})
    files = files && fs::exists(run_dir / rel);
  const auto& s = ck.params.shape;
  const bool shape_ok = s.input_dim == 4 && s.hidden == 256 && s.latent == 64 && ck.meta.window_length == 30 &&
                        ck.meta.train.batch_size == 64;
  const bool ok = sim.size() == 20 && sim.S.rows() == 20 && topo.at("node_count") == 20 && files && shape_ok &&
                  stab.at("blocks").size() == 4;
  std::string detail = "similarity " + std::to_string(sim.S.rows()) + "x" + std::to_string(sim.S.cols()) +
                       ", edges at tau=0.90: " + topo.at("edge_count").dump() + ", components: " +
                       topo.at("component_count").dump() + ", stability blocks: " +
                       std::to_string(stab.at("blocks").size()) + ", EG passed " + diag.at("passed").dump() + "/" +
                       diag.at("tested").dump() + "; d=4 L=30 H=256 k=64 batch=64 stride=" +
                       std::to_string(pin::kSmokeStride) + (files ? "" : "; missing exports");
  fs::remove_all(dir);
  return {ok, detail};
}

// Every regular file under `root`, as relative path -> contents.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

Outcome reproducibility() {
  const auto dir = testing_util::temp_dir("acceptance_c10");
  PlantedSpec spec;
  spec.clusters = {ClusterSpec{}, ClusterSpec{}};
  spec.cointegrated_pairs = {PairSpec{}};
  spec.independent_count = 3;
  spec.T = 1000;
  io::write_file(dir / "spec.json", to_json(spec).dump(2));
  io::write_file(dir / "run.ini",
                 "[window]\nstride = 5\n[model]\nhidden = 32\nlatent = 8\n[train]\nepochs = 5\n"
                 "[stability]\nmatched_edges = 10\n[diag]\ntrials = 2000\n");
  const std::vector<std::string> global{"--config", (dir / "run.ini").string(), "--seed", "7", "--deterministic"};
  for (const char* name : {"a", "b"}) {
    const auto failure = run_pipeline(dir / name, global, dir / "spec.json");
    if (!failure.empty()) return {false, std::string("run ") + name + " failed at " + failure};
  }
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  std::size_t differing = 0, manifests = 0;
  for (const auto& [path, content] : a) {
    const auto it = b.find(path);
    differing += it == b.end() || it->second != content;
    manifests += path.rfind("manifests/", 0) == 0;
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  fs::remove_all(dir);
  return {differing == 0 && manifests == kStages.size() + 1 && !a.empty(),
          std::to_string(a.size()) + " files (" + std::to_string(manifests) + " manifests) compared, " +
              std::to_string(differing) + " differ"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {"gradient correctness", gradient_check},
    {"training sanity", training_sanity},
    {"similarity invariants", similarity_invariants},
    {"graph monotonicity", graph_monotonicity},
    {"planted-cluster recovery", planted_recovery},
    {"ADF size and power", adf_size_power},
    {"Engle-Granger power", eg_power},
    {"stability self-consistency", stability_protocol},
    {"default-shape pipeline", default_shape_smoke},
    {"reproducibility", reproducibility},
};

bool run_criterion(int n) {
  const auto& c = kCriteria.at(static_cast<std::size_t>(n - 1));
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_budget = secs < pin::kBudget[n];
  const bool pass = o.pass && in_budget;
  std::cout << "criterion " << n << " " << (pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
            << " runtime=" << fmt(secs, 4) << "s budget=" << pin::kBudget[n] << "s"
            << (in_budget ? "" : " (over budget)") << std::endl;
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latsim acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  bool all = true;
  if (only > 0) {
    all = run_criterion(only);
  } else {
    for (int n = 1; n <= static_cast<int>(kCriteria.size()); ++n) all = run_criterion(n) && all;
  }
  return all ? 0 : 1;
}
