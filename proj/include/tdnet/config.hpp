// Experiment configuration: JSON file + command-line overrides, resolved to
// per-experiment defaults and validated before any run starts.
#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tdnet/env.hpp"
#include "tdnet/oracle.hpp"

namespace tdnet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchParams {
  double alpha = 0.01;
  double tolerance = 1e-12;
  int max_sweeps = 100000;
};

struct ExperimentConfig {
  std::string experiment = "custom";  // exp1 | exp2 | exp3 | custom
  std::uint64_t seed = 1;
  int runs = -1;  // -1: experiment default
  std::string out = "out";
  BoundaryRule boundary = BoundaryRule::kStayInPlace;
  Weighting weighting = Weighting::kUniformStates;
  std::vector<double> alphas;  // empty: experiment default
  std::vector<int> lengths = {50, 100, 150, 200};
  std::vector<int> horizons = {1, 2, 5, 10, 25};
  std::vector<int> checkpoints = {100, 200, 300, 400, 500};
  std::vector<int> depths = {2, 3, 4};  // exp3 sweep
  int tree_depth = 4;                   // exp2 / custom tree builder
  long steps = 250000;                  // online stream / custom trace length
  int bin_size = 1000;
  BatchParams batch;
  // custom experiment only:
  std::string qnet_file;
  std::string qnet_builder;  // "chain" | "action_tree"
  int qnet_depth = 3;
  std::string obs_mode;    // "full_state" | "bit_only"
  std::string features;    // "state_one_hot" | "bias_pair_prev"
  std::string activation;  // "identity" | "logistic"
  std::string mode;        // "online" | "batch"
  bool export_traces = false;
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const nlohmann::json& j,
                                          ExperimentConfig cfg = {}) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::read_field(j, "experiment", cfg.experiment);
  detail::read_field(j, "seed", cfg.seed);
  detail::read_field(j, "runs", cfg.runs);
  detail::read_field(j, "out", cfg.out);
  detail::read_field(j, "alpha", cfg.alphas);
  detail::read_field(j, "lengths", cfg.lengths);
  detail::read_field(j, "horizons", cfg.horizons);
  detail::read_field(j, "checkpoints", cfg.checkpoints);
  detail::read_field(j, "depths", cfg.depths);
  detail::read_field(j, "tree_depth", cfg.tree_depth);
  detail::read_field(j, "steps", cfg.steps);
  detail::read_field(j, "bin_size", cfg.bin_size);
  detail::read_field(j, "qnet_file", cfg.qnet_file);
  detail::read_field(j, "qnet_builder", cfg.qnet_builder);
  detail::read_field(j, "qnet_depth", cfg.qnet_depth);
  detail::read_field(j, "obs_mode", cfg.obs_mode);
  detail::read_field(j, "features", cfg.features);
  detail::read_field(j, "activation", cfg.activation);
  detail::read_field(j, "mode", cfg.mode);
  detail::read_field(j, "export_traces", cfg.export_traces);
  if (j.contains("boundary")) {
    const std::string b = j.at("boundary").get<std::string>();
    if (b == "stay") cfg.boundary = BoundaryRule::kStayInPlace;
    else if (b == "reflect") cfg.boundary = BoundaryRule::kReflect;
    else throw ConfigError("config: boundary must be 'stay' or 'reflect'");
  }
  if (j.contains("weighting")) {
    const std::string w = j.at("weighting").get<std::string>();
    if (w == "uniform") cfg.weighting = Weighting::kUniformStates;
    else if (w == "visitation") cfg.weighting = Weighting::kEmpiricalVisitation;
    else throw ConfigError("config: weighting must be 'uniform' or 'visitation'");
  }
  if (j.contains("batch")) {
    const auto& b = j.at("batch");
    detail::read_field(b, "alpha", cfg.batch.alpha);
    detail::read_field(b, "tolerance", cfg.batch.tolerance);
    detail::read_field(b, "max_sweeps", cfg.batch.max_sweeps);
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path,
                                         ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return parse_config_json(j, std::move(base));
}

/// Fill experiment defaults and reject invalid combinations. Called once,
/// before any run starts.
inline void resolve_config(ExperimentConfig& cfg) {
  if (cfg.experiment == "exp1") {
    if (cfg.runs < 0) cfg.runs = 100;
    if (cfg.horizons.empty()) throw ConfigError("config: horizons empty");
  } else if (cfg.experiment == "exp2") {
    if (cfg.runs < 0) cfg.runs = 100;
    if (cfg.alphas.empty()) cfg.alphas = {1.0};
    if (cfg.checkpoints.empty()) throw ConfigError("config: checkpoints empty");
  } else if (cfg.experiment == "exp3") {
    if (cfg.runs < 0) cfg.runs = 50;
    if (cfg.alphas.empty()) cfg.alphas = {1.0, 0.5, 0.25, 0.1, 0.05};
    if (cfg.depths.empty()) throw ConfigError("config: depths empty");
  } else if (cfg.experiment == "custom") {
    if (cfg.runs < 0) cfg.runs = 1;
    if (cfg.alphas.empty()) cfg.alphas = {0.1};
    if (cfg.mode.empty()) cfg.mode = "batch";
    if (cfg.mode != "online" && cfg.mode != "batch")
      throw ConfigError("config: mode must be 'online' or 'batch'");
    if (cfg.qnet_file.empty() == cfg.qnet_builder.empty())
      throw ConfigError(
          "config: custom runs need exactly one of qnet_file / qnet_builder");
    if (!cfg.qnet_file.empty() && !std::filesystem::exists(cfg.qnet_file))
      throw ConfigError("config: qnet_file does not exist: " + cfg.qnet_file);
    if (!cfg.qnet_builder.empty() && cfg.qnet_builder != "chain" &&
        cfg.qnet_builder != "action_tree")
      throw ConfigError("config: qnet_builder must be 'chain' or 'action_tree'");
    if (!cfg.activation.empty() && cfg.activation != "identity" &&
        cfg.activation != "logistic")
      throw ConfigError("config: activation must be 'identity' or 'logistic'");
    if (!cfg.features.empty() && cfg.features != "state_one_hot" &&
        cfg.features != "bias_pair_prev")
      throw ConfigError(
          "config: features must be 'state_one_hot' or 'bias_pair_prev'");
    if (!cfg.obs_mode.empty() && cfg.obs_mode != "full_state" &&
        cfg.obs_mode != "bit_only")
      throw ConfigError("config: obs_mode must be 'full_state' or 'bit_only'");
  } else {
    throw ConfigError("config: unknown experiment '" + cfg.experiment + "'");
  }
  if (cfg.runs < 1) throw ConfigError("config: runs must be >= 1");
  if (cfg.steps < 1) throw ConfigError("config: steps must be >= 1");
  if (cfg.bin_size < 1) throw ConfigError("config: bin_size must be >= 1");
  for (int l : cfg.lengths)
    if (l < 2) throw ConfigError("config: lengths must be >= 2");
  for (int h : cfg.horizons)
    if (h < 1 || h > 25) throw ConfigError("config: horizons must be in 1..25");
  for (size_t i = 0; i < cfg.checkpoints.size(); ++i) {
    if (cfg.checkpoints[i] < 2)
      throw ConfigError("config: checkpoints must be >= 2");
    if (i > 0 && cfg.checkpoints[i] <= cfg.checkpoints[i - 1])
      throw ConfigError("config: checkpoints must be strictly increasing");
  }
  for (double a : cfg.alphas)
    if (a < 0) throw ConfigError("config: alpha must be >= 0");
  if (cfg.tree_depth < 1 || cfg.qnet_depth < 1)
    throw ConfigError("config: depths must be >= 1");
  for (int d : cfg.depths)
    if (d < 1) throw ConfigError("config: depths must be >= 1");
  if (cfg.batch.alpha <= 0 || cfg.batch.tolerance <= 0 ||
      cfg.batch.max_sweeps < 1)
    throw ConfigError("config: bad batch parameters");
}

/// Canonical JSON of the resolved config. The output directory is excluded
/// so identical runs hash identically wherever they land.
inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["runs"] = cfg.runs;
  j["boundary"] =
      cfg.boundary == BoundaryRule::kStayInPlace ? "stay" : "reflect";
  j["weighting"] =
      cfg.weighting == Weighting::kUniformStates ? "uniform" : "visitation";
  j["alpha"] = cfg.alphas;
  j["lengths"] = cfg.lengths;
  j["horizons"] = cfg.horizons;
  j["checkpoints"] = cfg.checkpoints;
  j["depths"] = cfg.depths;
  j["tree_depth"] = cfg.tree_depth;
  j["steps"] = cfg.steps;
  j["bin_size"] = cfg.bin_size;
  j["batch"] = {{"alpha", cfg.batch.alpha},
                {"tolerance", cfg.batch.tolerance},
                {"max_sweeps", cfg.batch.max_sweeps}};
  j["qnet_file"] = cfg.qnet_file;
  j["qnet_builder"] = cfg.qnet_builder;
  j["qnet_depth"] = cfg.qnet_depth;
  j["obs_mode"] = cfg.obs_mode;
  j["features"] = cfg.features;
  j["activation"] = cfg.activation;
  j["mode"] = cfg.mode;
  return j;
}

}  // namespace tdnet
