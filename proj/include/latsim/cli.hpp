#ifndef LATSIM_CLI_HPP_
#define LATSIM_CLI_HPP_

// The `latsim` command line. Each subcommand reads and writes fixed files
// under the run directory (see run_paths) and records a manifest.
//
// Failures print one line on stderr:
//   error code=<ErrorCode> exit=<status> message=<text>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latsim/checkpoint.hpp"
#include "latsim/config.hpp"
#include "latsim/diagnostics.hpp"
#include "latsim/error.hpp"
#include "latsim/graph.hpp"
#include "latsim/io.hpp"
#include "latsim/klines.hpp"
#include "latsim/pipeline.hpp"
#include "latsim/stability.hpp"
#include "latsim/synth.hpp"

namespace latsim {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::filesystem::path out_dir = "run";
  std::vector<std::string> sets;  // key=value overrides
};

namespace cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Context {
  GlobalOptions global;
  PipelineConfig cfg;
  std::ostream* out = nullptr;

  fs::path at(const fs::path& rel) const { return global.out_dir / rel; }

  std::ostream& log() const { return *out; }

  void manifest(const std::string& command, std::vector<fs::path> inputs, std::vector<fs::path> outputs) const {
    RunManifest m{command, cfg.seed(), global.deterministic, to_ini(cfg), std::move(inputs), std::move(outputs)};
    write_manifest(global.out_dir, m);
  }
};

inline PipelineConfig resolve_config(const GlobalOptions& g) {
  auto cfg = g.config_path.empty() ? make_config() : load_config(g.config_path);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Usage, "--set expects key=value, got '" + kv + "'");
    cfg = with_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg = with_override(cfg, "train.seed", std::to_string(*g.seed));
  return cfg;
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) fail(ErrorCode::IoError, what + " not found: " + p.string());
}

inline std::vector<fs::path> dataset_files(const Context& c) { return files_under(c.global.out_dir, run_paths::kData); }

inline std::vector<fs::path> csv_files(const Context& c) {
  std::vector<fs::path> out;
  for (const auto& f : dataset_files(c))
    if (f.extension() == ".csv") out.push_back(f);
  return out;
}

inline void clear_dataset(const Context& c) {
  const auto dir = c.at(run_paths::kData);
  if (!fs::is_directory(dir)) return;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") fs::remove(e.path());
}

inline std::map<std::string, OhlcSeries> by_id(const std::vector<OhlcSeries>& series) {
  std::map<std::string, OhlcSeries> m;
  for (const auto& s : series) m.emplace(s.entity_id, s);
  return m;
}

// Epoch milliseconds or a YYYY-MM-DD date (UTC midnight).
inline std::int64_t parse_time(const std::string& s) {
  if (auto v = io::parse_int(s)) return *v;
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(s);
  if (in >> y >> dash1 >> m >> dash2 >> d && dash1 == '-' && dash2 == '-' && in.peek() == EOF) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (ymd.ok()) {
      const auto tp = std::chrono::sys_days{ymd};
      return std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
    }
  }
  fail(ErrorCode::Usage, "bad time '" + s + "': expected epoch milliseconds or YYYY-MM-DD");
}

// ---- commands ---------------------------------------------------------------------

inline void cmd_ingest(const Context& c, const std::vector<std::string>& inputs) {
  const auto step = interval_ms(c.cfg.interval);
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    } else {
      require_file(in, "input");
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::IoError, "ingest: no CSV inputs");
  std::vector<OhlcSeries> series;
  for (const auto& f : files) {
    auto s = enforce_continuity(load_csv(f, f.stem().string()), step, c.cfg.gap_tolerance, c.cfg.forward_fill);
    for (const auto& prev : series)
      if (prev.entity_id == s.entity_id) fail(ErrorCode::IoError, "ingest: duplicate entity id " + s.entity_id);
    series.push_back(std::move(s));
  }
  write_dataset(c.at(run_paths::kData), series);
  c.log() << "ingested " << series.size() << " series into " << c.at(run_paths::kData).string() << "\n";
  c.manifest("ingest", {}, csv_files(c));
}

inline void cmd_fetch(const Context& c, const std::string& endpoint, const std::vector<std::string>& symbols,
                      const std::string& start, const std::string& end) {
  FetchOptions opt;
  opt.interval = c.cfg.interval;
  opt.gap_tolerance = c.cfg.gap_tolerance;
  opt.forward_fill = c.cfg.forward_fill;
  const auto t0 = parse_time(start), t1 = parse_time(end);
  if (t1 < t0) fail(ErrorCode::Usage, "fetch: --end precedes --start");
  std::vector<OhlcSeries> series;
  for (const auto& sym : symbols) {
    series.push_back(fetch_klines(endpoint, sym, t0, t1, opt));
    c.log() << "fetched " << sym << ": " << series.back().size() << " bars\n";
  }
  write_dataset(c.at(run_paths::kData), series);
  c.manifest("fetch", {}, csv_files(c));
}

inline PlantedSpec default_planted_spec() {
  PlantedSpec s;
  s.clusters = {ClusterSpec{}, ClusterSpec{}};
  s.cointegrated_pairs = {PairSpec{}, PairSpec{}};
  s.independent_count = 5;
  return s;
}

inline void cmd_synth(const Context& c, const std::string& spec_path) {
  PlantedSpec spec = default_planted_spec();
  if (!spec_path.empty()) {
    require_file(spec_path, "spec");
    spec = planted_spec_from_json(io::read_file(spec_path));
  }
  if (c.global.seed) spec.seed = *c.global.seed;
  const auto u = gen_universe(spec);
  clear_dataset(c);
  write_dataset(c.at(run_paths::kData), u.series);
  io::write_file(c.at(run_paths::kTruth), to_json(u.truth).dump(2) + "\n");
  io::write_file(c.at(run_paths::kSpec), to_json(spec).dump(2) + "\n");
  c.log() << "synthesized " << u.series.size() << " series x " << spec.T << " bars\n";
  c.manifest("synth", {}, dataset_files(c));
}

inline void cmd_train(const Context& c) {
  const auto series = load_dataset(c.at(run_paths::kData));
  const auto batch = window_batch(returns_of(series), c.cfg);
  for (const auto& s : batch.skipped) c.log() << "skipped " << s.entity_id << ": too short for one window\n";
  c.log() << "training on " << batch.size() << " windows (" << c.cfg.precision << ")\n";
  const int epochs = c.cfg.train.epochs;
  const auto model = train_model(batch, c.cfg, c.cfg.seed(), [&](int epoch, double loss) {
    c.log() << "epoch " << epoch << "/" << epochs << " loss=" << io::format_double(loss) << "\n";
  });
  io::write_file(c.at(run_paths::kCheckpoint), model.checkpoint);
  std::string trace = "epoch,loss\n";
  for (std::size_t e = 0; e < model.epoch_loss.size(); ++e)
    trace += std::to_string(e + 1) + "," + io::format_double(model.epoch_loss[e]) + "\n";
  io::write_file(c.at(run_paths::kLossTrace), trace);
  c.manifest("train", csv_files(c), {run_paths::kCheckpoint, run_paths::kLossTrace});
}

inline void cmd_embed(const Context& c) {
  require_file(c.at(run_paths::kCheckpoint), "checkpoint");
  const auto ck = load_checkpoint(c.at(run_paths::kCheckpoint));
  if (ck.meta.window_length != c.cfg.window_length)
    fail(ErrorCode::ShapeMismatch, "checkpoint window length " + std::to_string(ck.meta.window_length) +
                                       " differs from window.length " + std::to_string(c.cfg.window_length));
  const auto series = load_dataset(c.at(run_paths::kData));
  const auto batch = window_batch(returns_of(series), c.cfg);
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "embed: no windows");
  const auto emb = embed_entities(ck.params, batch);
  const auto sim = similarity_matrix(emb);
  io::write_file(c.at(run_paths::kEmbeddings), embeddings_to_csv(emb));
  io::write_file(c.at(run_paths::kSimilarity), similarity_to_csv(sim));
  io::write_file(c.at(run_paths::kSimilarityLong), similarity_to_long_csv(sim));
  c.log() << "embedded " << emb.size() << " entities\n";
  auto inputs = csv_files(c);
  inputs.push_back(run_paths::kCheckpoint);
  c.manifest("embed", inputs, {run_paths::kEmbeddings, run_paths::kSimilarity, run_paths::kSimilarityLong});
}

inline SimilarityMatrix read_similarity(const Context& c) {
  require_file(c.at(run_paths::kSimilarity), "similarity matrix");
  return similarity_from_csv(io::read_file(c.at(run_paths::kSimilarity)));
}

inline void cmd_graph(const Context& c) {
  const auto sim = read_similarity(c);
  const auto g = build_graph(sim, c.cfg);
  export_graph(g, GraphFormat::Json, c.at(run_paths::kGraphJson));
  export_graph(g, GraphFormat::Dot, c.at(run_paths::kGraphDot));
  export_graph(g, GraphFormat::EdgeCsv, c.at(run_paths::kGraphEdges));
  const auto topo = topology(g);
  io::write_file(c.at(run_paths::kTopology), topology_to_json(g, topo).dump(2) + "\n");
  c.log() << "graph: " << topo.node_count << " nodes, " << topo.edge_count << " edges, " << topo.component_count
          << " components\n";
  c.manifest("graph", {run_paths::kSimilarity},
             {run_paths::kGraphJson, run_paths::kGraphDot, run_paths::kGraphEdges, run_paths::kTopology});
}

inline void cmd_stability(const Context& c) {
  const auto sim = read_similarity(c);
  const auto series = load_dataset(c.at(run_paths::kData));
  const int epochs = c.cfg.train.epochs;
  auto r = run_stability(series, c.cfg, [&](std::size_t b, int epoch, double loss) {
    c.log() << "block " << b << " epoch " << epoch << "/" << epochs << " loss=" << io::format_double(loss)
            << "\n";
  });
  r.sweep = threshold_sweep(sim, c.cfg.stability_sweep);
  io::write_file(c.at(run_paths::kStability), to_json(r, sim.entity_ids).dump(2) + "\n");
  io::write_file(c.at(run_paths::kSweep), sweep_to_csv(r.sweep));
  c.log() << "stability: " << r.blocks.block_count() << " blocks, " << r.matched_edges << " edges per block, "
          << r.core.size() << " core edges\n";
  auto inputs = csv_files(c);
  inputs.push_back(run_paths::kSimilarity);
  c.manifest("stability", inputs, {run_paths::kStability, run_paths::kSweep});
}

inline void cmd_diagnose(const Context& c) {
  require_file(c.at(run_paths::kGraphJson), "graph");
  const auto g = graph_from_json(io::read_file(c.at(run_paths::kGraphJson)));
  const auto prices = by_id(load_dataset(c.at(run_paths::kData)));
  std::set<fs::path> cache_files;
  const CriticalValueSource cv = [&](std::size_t T) {
    const auto v = cached_critical_values(c.at(run_paths::kCache), T, c.cfg.diag_trials, c.cfg.seed(),
                                          NullModel::EngleGranger, c.cfg.lag_policy);
    cache_files.insert(fs::relative(critical_value_cache_path(c.at(run_paths::kCache), NullModel::EngleGranger, T,
                                                              c.cfg.diag_trials, c.cfg.seed(), c.cfg.lag_policy),
                                    c.global.out_dir));
    return v.at(c.cfg.diag_confidence);
  };
  const auto rep = diagnose_graph(g, prices, cv, c.cfg.lag_policy);
  io::write_file(c.at(run_paths::kEgResults), eg_results_to_csv(rep.results));
  auto summary = to_json(rep.summary);
  summary["confidence"] = c.cfg.diag_confidence;
  io::write_file(c.at(run_paths::kDiagSummary), summary.dump(2) + "\n");
  c.log() << "diagnose: " << rep.summary.passed << "/" << rep.summary.tested << " edges cointegrated\n";

  std::vector<fs::path> outputs{run_paths::kEgResults, run_paths::kDiagSummary};
  auto inputs = csv_files(c);
  inputs.push_back(run_paths::kGraphJson);
  if (fs::exists(c.at(run_paths::kTruth))) {
    const auto truth = ground_truth_from_json(io::read_file(c.at(run_paths::kTruth)));
    if (!truth.cointegrated_pairs.empty()) {
      const auto planted = diagnose_pairs(truth.cointegrated_pairs, prices, cv, c.cfg.lag_policy);
      io::write_file(c.at(run_paths::kPlantedResults), eg_results_to_csv(planted.results));
      auto ps = to_json(planted.summary);
      ps["confidence"] = c.cfg.diag_confidence;
      io::write_file(c.at(run_paths::kPlantedSummary), ps.dump(2) + "\n");
      c.log() << "diagnose: planted pairs " << planted.summary.passed << "/" << planted.summary.tested
              << " cointegrated\n";
      outputs.push_back(run_paths::kPlantedResults);
      outputs.push_back(run_paths::kPlantedSummary);
    }
    inputs.push_back(run_paths::kTruth);
  }
  outputs.insert(outputs.end(), cache_files.begin(), cache_files.end());
  c.manifest("diagnose", inputs, outputs);
}

inline std::optional<json> read_json_if(const Context& c, const fs::path& rel, std::vector<fs::path>& inputs) {
  if (!fs::exists(c.at(rel))) return std::nullopt;
  inputs.push_back(rel);
  return json::parse(io::read_file(c.at(rel)));
}

// One JSON document plus plot-ready CSVs: the full similarity matrix in long
// form (heat map) and the edge list annotated with diagnostics.
inline void cmd_report(const Context& c) {
  std::vector<fs::path> inputs{run_paths::kSimilarity, run_paths::kGraphJson};
  const auto sim = read_similarity(c);
  require_file(c.at(run_paths::kGraphJson), "graph");
  const auto g = graph_from_json(io::read_file(c.at(run_paths::kGraphJson)));
  const auto topo = topology(g);

  std::map<std::pair<std::string, std::string>, std::string> eg_flag;
  if (fs::exists(c.at(run_paths::kEgResults))) {
    inputs.push_back(run_paths::kEgResults);
    const auto text = io::read_file(c.at(run_paths::kEgResults));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = io::split(line);
      if (f.size() != 6) fail(ErrorCode::MalformedRow, "eg_results.csv: " + line);
      auto& flag = eg_flag[{std::string(f[0]), std::string(f[1])}];
      if (flag != "true") flag = std::string(f[5]);
    }
  }

  json j;
  j["tool_version"] = kToolVersion;
  j["seed"] = c.cfg.seed();
  j["config"] = c.cfg.values;
  j["entities"] = sim.entity_ids;
  auto rows = json::array();
  for (Eigen::Index i = 0; i < sim.S.rows(); ++i) {
    auto row = json::array();
    for (Eigen::Index k = 0; k < sim.S.cols(); ++k) row.push_back(sim.S(i, k));
    rows.push_back(std::move(row));
  }
  j["similarity"] = std::move(rows);
  auto edges = json::array();
  std::string edge_csv = "i,j,weight,cointegrated\n";
  for (const auto& e : g.edges) {
    const auto& a = g.nodes[e.i];
    const auto& b = g.nodes[e.j];
    const auto it = eg_flag.find({a, b});
    const std::string flag = it == eg_flag.end() ? "" : it->second;
    json ej{{"i", a}, {"j", b}, {"weight", e.weight}};
    if (!flag.empty()) ej["cointegrated"] = flag == "true";
    edges.push_back(std::move(ej));
    edge_csv += a + "," + b + "," + io::format_double(e.weight) + "," + flag + "\n";
  }
  j["graph"] = {{"threshold", g.threshold}, {"edges", std::move(edges)}};
  j["topology"] = topology_to_json(g, topo);
  if (auto s = read_json_if(c, run_paths::kStability, inputs)) j["stability"] = *s;
  if (auto s = read_json_if(c, run_paths::kDiagSummary, inputs)) j["diagnostics"] = *s;
  if (auto s = read_json_if(c, run_paths::kPlantedSummary, inputs)) j["planted_diagnostics"] = *s;
  if (fs::exists(c.at(run_paths::kTruth))) {
    inputs.push_back(run_paths::kTruth);
    const auto truth = ground_truth_from_json(io::read_file(c.at(run_paths::kTruth)));
    j["planted_recovery"] = to_json(score_recovery(g.edge_set(), g.nodes, truth));
  }
  if (fs::exists(c.at(run_paths::kLossTrace))) inputs.push_back(run_paths::kLossTrace);

  std::string heat = "i,j,similarity\n";
  for (Eigen::Index a = 0; a < sim.S.rows(); ++a)
    for (Eigen::Index b = 0; b < sim.S.cols(); ++b)
      heat += sim.entity_ids[a] + "," + sim.entity_ids[b] + "," + io::format_double(sim.S(a, b)) + "\n";

  io::write_file(c.at(run_paths::kReport), j.dump(2) + "\n");
  io::write_file(c.at(run_paths::kHeatmap), heat);
  io::write_file(c.at(run_paths::kReportEdges), edge_csv);
  c.log() << "report: " << c.at(run_paths::kReport).string() << "\n";
  c.manifest("report", inputs, {run_paths::kReport, run_paths::kHeatmap, run_paths::kReportEdges});
}

inline std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

inline int report_error(std::ostream& err, ErrorCode code, const std::string& what) {
  std::string msg = what;
  const auto prefix = std::string(to_string(code)) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  const int status = exit_status(code);
  err << "error code=" << to_string(code) << " exit=" << status << " message=" << one_line(msg) << "\n";
  return status;
}

}  // namespace cli

// Entry point shared by tools/latsim.cpp and the tests. Returns the exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  GlobalOptions g;
  std::string out_dir = g.out_dir.string();
  std::uint64_t seed = 0;

  CLI::App app{"Latent similarity networks from OHLC time series", "latsim"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", g.config_path, "INI config file");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides train.seed and the synth spec seed)");
  app.add_flag("--deterministic", g.deterministic, "record deterministic mode in manifests");
  app.add_option("--out-dir", out_dir, "run directory")->capture_default_str();
  app.add_option("--set", g.sets, "config override key=value (repeatable)");

  std::vector<std::string> inputs, symbols;
  std::string endpoint, start, end, spec_path;
  auto* ingest = app.add_subcommand("ingest", "import OHLC CSV files into the run directory");
  ingest->add_option("--input", inputs, "CSV files or directories")->required();
  auto* fetch = app.add_subcommand("fetch", "download klines from an exchange REST endpoint");
  fetch->add_option("--endpoint", endpoint, "klines URL, e.g. https://api.binance.com/api/v3/klines")->required();
  fetch->add_option("--symbols", symbols, "symbols")->required()->delimiter(',');
  fetch->add_option("--start", start, "epoch ms or YYYY-MM-DD")->required();
  fetch->add_option("--end", end, "epoch ms or YYYY-MM-DD")->required();
  auto* synth = app.add_subcommand("synth", "generate a planted universe");
  synth->add_option("--spec", spec_path, "PlantedSpec JSON");
  auto* train = app.add_subcommand("train", "train the autoencoder");
  auto* embed = app.add_subcommand("embed", "entity embeddings and cosine similarity");
  auto* graph = app.add_subcommand("graph", "threshold graph, exports and topology");
  auto* stability = app.add_subcommand("stability", "block re-estimation and threshold sweep");
  auto* diagnose = app.add_subcommand("diagnose", "Engle-Granger tests on graph edges");
  auto* report = app.add_subcommand("report", "consolidated report and plot data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    return cli::report_error(err, ErrorCode::Usage, e.what());
  }

  try {
    g.out_dir = out_dir;
    if (seed_opt->count() > 0) g.seed = seed;
    cli::Context c{g, cli::resolve_config(g), &out};
    if (*ingest) cli::cmd_ingest(c, inputs);
    else if (*fetch) cli::cmd_fetch(c, endpoint, symbols, start, end);
    else if (*synth) cli::cmd_synth(c, spec_path);
    else if (*train) cli::cmd_train(c);
    else if (*embed) cli::cmd_embed(c);
    else if (*graph) cli::cmd_graph(c);
    else if (*stability) cli::cmd_stability(c);
    else if (*diagnose) cli::cmd_diagnose(c);
    else if (*report) cli::cmd_report(c);
    return 0;
  } catch (const Error& e) {
    return cli::report_error(err, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return cli::report_error(err, ErrorCode::IoError, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return cli::report_error(err, ErrorCode::IoError, e.what());
  }
}

}  // namespace latsim

#endif  // LATSIM_CLI_HPP_
