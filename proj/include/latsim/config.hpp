#ifndef LATSIM_CONFIG_HPP_
#define LATSIM_CONFIG_HPP_

// Pipeline configuration: an INI file of [section] blocks with key = value
// lines. Every key has a default; unknown keys and unparsable values are
// rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "latsim/autoencoder.hpp"
#include "latsim/diagnostics.hpp"
#include "latsim/error.hpp"
#include "latsim/io.hpp"
#include "latsim/stability.hpp"
#include "latsim/windowing.hpp"

namespace latsim {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* doc;
};

inline constexpr ConfigKey kConfigKeys[] = {
    {"data.interval", "1h", "bar interval label (1m..1d)"},
    {"data.gap_tolerance", "0", "missing bars tolerated per series before GapDetected"},
    {"data.forward_fill", "false", "fill missing bars with the previous close instead of failing"},
    {"window.length", "30", "window length L"},
    {"window.stride", "1", "window stride"},
    {"window.norm", "zscore", "per-window normalization: zscore | minmax"},
    {"model.hidden", "256", "LSTM hidden size H"},
    {"model.latent", "64", "latent size k"},
    {"model.precision", "float", "training precision: float | double"},
    {"train.batch_size", "64", "mini-batch size"},
    {"train.epochs", "20", "training epochs"},
    {"train.learning_rate", "0.001", "Adam step size"},
    {"train.adam_beta1", "0.9", "Adam beta1"},
    {"train.adam_beta2", "0.999", "Adam beta2"},
    {"train.adam_eps", "1e-08", "Adam epsilon"},
    {"train.clip_norm", "0", "global gradient max-norm, 0 disables"},
    {"train.seed", "42", "master seed"},
    {"graph.threshold", "0.9", "cosine threshold tau (inclusive)"},
    {"graph.top_edges", "0", "if > 0, keep exactly this many strongest edges instead of thresholding"},
    {"stability.blocks", "4", "number of contiguous time blocks B"},
    {"stability.matched_edges", "0", "edges kept per block graph; 0 uses block 0's count at graph.threshold"},
    {"stability.sweep", "0.8,0.82,0.84,0.86,0.88,0.9,0.92,0.94,0.96,0.98", "ascending sweep thresholds"},
    {"stability.seeding", "per_block", "per_block (master + block index) | shared (master for every block)"},
    {"diag.confidence", "0.95", "Engle-Granger confidence: 0.90 | 0.95 | 0.99"},
    {"diag.trials", "20000", "Monte Carlo trials for critical values"},
    {"diag.max_lags_policy", "schwert", "ADF lag bound: schwert | <non-negative integer>"},
};

struct PipelineConfig {
  std::string interval = "1h";
  std::int64_t gap_tolerance = 0;
  bool forward_fill = false;

  Eigen::Index window_length = 30;
  Eigen::Index window_stride = 1;
  WindowNorm norm = WindowNorm::ZScore;

  ModelShape shape;
  std::string precision = "float";
  TrainConfig train;

  double graph_threshold = 0.90;
  std::size_t graph_top_edges = 0;

  std::size_t stability_blocks = 4;
  std::size_t stability_matched_edges = 0;
  std::vector<double> stability_sweep;
  BlockSeeding seeding = BlockSeeding::PerBlock;

  double diag_confidence = 0.95;
  std::size_t diag_trials = 20000;
  LagPolicy lag_policy;

  // Canonical key -> value text, as loaded (defaults filled in).
  std::map<std::string, std::string> values;

  std::uint64_t seed() const { return train.seed; }
};

namespace detail {

inline bool is_known_key(const std::string& key) {
  for (const auto& k : kConfigKeys)
    if (key == k.name) return true;
  return false;
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& v, const std::string& want) {
  fail(ErrorCode::ConfigInvalid, key + " = '" + v + "': expected " + want);
}

inline std::int64_t int_value(const std::string& key, const std::string& v, std::int64_t min) {
  const auto p = io::parse_int(v);
  if (!p || *p < min) bad_value(key, v, "an integer >= " + std::to_string(min));
  return *p;
}

inline double real_value(const std::string& key, const std::string& v) {
  const auto p = io::parse_double(v);
  if (!p || !std::isfinite(*p)) bad_value(key, v, "a finite number");
  return *p;
}

inline bool bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

}  // namespace detail

// Builds a config from key -> value overrides on top of the defaults.
inline PipelineConfig make_config(const std::map<std::string, std::string>& overrides = {}) {
  PipelineConfig c;
  for (const auto& k : kConfigKeys) c.values[k.name] = k.default_value;
  for (const auto& [key, v] : overrides) {
    if (!detail::is_known_key(key)) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    c.values[key] = v;
  }
  const auto& v = c.values;
  auto get = [&](const char* key) -> const std::string& { return v.at(key); };
  using detail::bool_value, detail::int_value, detail::real_value;

  c.interval = get("data.interval");
  (void)interval_ms(c.interval);
  c.gap_tolerance = int_value("data.gap_tolerance", get("data.gap_tolerance"), 0);
  c.forward_fill = bool_value("data.forward_fill", get("data.forward_fill"));

  c.window_length = int_value("window.length", get("window.length"), 2);
  c.window_stride = int_value("window.stride", get("window.stride"), 1);
  c.norm = parse_window_norm(get("window.norm"));

  c.shape.hidden = int_value("model.hidden", get("model.hidden"), 1);
  c.shape.latent = int_value("model.latent", get("model.latent"), 1);
  c.precision = get("model.precision");
  if (c.precision != "float" && c.precision != "double")
    detail::bad_value("model.precision", c.precision, "float or double");

  c.train.batch_size = static_cast<int>(int_value("train.batch_size", get("train.batch_size"), 1));
  c.train.epochs = static_cast<int>(int_value("train.epochs", get("train.epochs"), 1));
  c.train.learning_rate = real_value("train.learning_rate", get("train.learning_rate"));
  c.train.adam_beta1 = real_value("train.adam_beta1", get("train.adam_beta1"));
  c.train.adam_beta2 = real_value("train.adam_beta2", get("train.adam_beta2"));
  c.train.adam_eps = real_value("train.adam_eps", get("train.adam_eps"));
  c.train.clip_norm = real_value("train.clip_norm", get("train.clip_norm"));
  c.train.seed = static_cast<std::uint64_t>(int_value("train.seed", get("train.seed"), 0));
  c.train.validate();

  c.graph_threshold = real_value("graph.threshold", get("graph.threshold"));
  if (c.graph_threshold < -1.0 || c.graph_threshold > 1.0)
    detail::bad_value("graph.threshold", get("graph.threshold"), "a value in [-1, 1]");
  c.graph_top_edges = static_cast<std::size_t>(int_value("graph.top_edges", get("graph.top_edges"), 0));

  c.stability_blocks = static_cast<std::size_t>(int_value("stability.blocks", get("stability.blocks"), 2));
  c.stability_matched_edges =
      static_cast<std::size_t>(int_value("stability.matched_edges", get("stability.matched_edges"), 0));
  c.stability_sweep.clear();
  for (auto f : io::split(get("stability.sweep"))) {
    std::string s(f);
    s.erase(0, s.find_first_not_of(' '));
    s.erase(s.find_last_not_of(' ') + 1);
    const double t = real_value("stability.sweep", s);
    if (t < -1.0 || t > 1.0 || (!c.stability_sweep.empty() && t < c.stability_sweep.back()))
      detail::bad_value("stability.sweep", get("stability.sweep"), "ascending thresholds in [-1, 1]");
    c.stability_sweep.push_back(t);
  }
  c.seeding = parse_block_seeding(get("stability.seeding"));

  c.diag_confidence = real_value("diag.confidence", get("diag.confidence"));
  CriticalValues{}.at(c.diag_confidence);
  c.diag_trials = static_cast<std::size_t>(int_value("diag.trials", get("diag.trials"), 100));
  c.lag_policy = parse_lag_policy(get("diag.max_lags_policy"));
  return c;
}

// Parses INI text. Keys outside a section are rejected, as are duplicates.
inline PipelineConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> overrides;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(ErrorCode::ConfigInvalid, "config key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      const auto full = section + "." + key;
      if (!detail::is_known_key(full)) fail(ErrorCode::ConfigInvalid, "unknown config key '" + full + "'");
      overrides[full] = value.get_value<std::string>();
    }
  }
  return make_config(overrides);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::ConfigInvalid, "config file not found: " + path.string());
  return parse_config(io::read_file(path));
}

// Canonical INI text: sections and keys in table order, every key present.
inline std::string to_ini(const PipelineConfig& c) {
  std::string out, section;
  for (const auto& k : kConfigKeys) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + c.values.at(name) + "\n";
  }
  return out;
}

inline PipelineConfig with_override(const PipelineConfig& c, const std::string& key, const std::string& value) {
  auto v = c.values;
  v[key] = value;
  return make_config(v);
}

}  // namespace latsim

#endif  // LATSIM_CONFIG_HPP_
