// Experiment drivers: the three benchmark reproductions plus a free-form
// runner, all emitting deterministic CSV artifacts. A run sweep may execute
// runs in parallel; every run owns its env, learner, and RNG, and results
// are reduced in run order so artifacts are byte-identical for a given
// (config, seed).
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tdnet/anet.hpp"
#include "tdnet/config.hpp"
#include "tdnet/env.hpp"
#include "tdnet/io.hpp"
#include "tdnet/learner.hpp"
#include "tdnet/mc.hpp"
#include "tdnet/oracle.hpp"
#include "tdnet/qnet.hpp"
#include "tdnet/qnet_io.hpp"

namespace tdnet {

/// Per-run RNG stream: splitmix64 of the master seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

inline void parallel_runs(int count, const std::function<void(int)>& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers =
      std::max(1, std::min<int>(static_cast<int>(hw), count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

inline Vec state_weights_for(const ExperimentConfig& cfg, const Trace& trace) {
  return cfg.weighting == Weighting::kUniformStates ? uniform_state_weights()
                                                    : visitation_weights(trace);
}

inline MetaInfo base_meta(const ExperimentConfig& cfg) {
  MetaInfo meta;
  meta.set("config_hash", fnv1a64(config_json(cfg).dump()))
      .set("seed", cfg.seed)
      .set("runs", static_cast<std::uint64_t>(cfg.runs))
      .set("weighting", cfg.weighting == Weighting::kUniformStates
                            ? "uniform"
                            : "visitation")
      .set("boundary", cfg.boundary == BoundaryRule::kStayInPlace ? "stay"
                                                                  : "reflect");
  return meta;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment 1: n-step unconditional prediction, batch updating.
// ---------------------------------------------------------------------------

struct Exp1Cell {
  double mc = 0.0, mc_se = 0.0, td = 0.0, td_se = 0.0;
};

struct Exp1Result {
  std::vector<int> lengths;
  std::vector<int> horizons;
  std::vector<std::vector<Exp1Cell>> cells;  // [length][horizon]
  double max_one_step_diff = 0.0;  // max |MC - TD| over runs, 1-step cells
  bool all_converged = true;
  std::string artifact;
};

inline Exp1Result run_exp1(const ExperimentConfig& cfg) {
  const int depth = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  const QuestionNet q =
      build_chain(depth, observation_width(ObsMode::kFullState));
  const FeatureRecipe recipe = FeatureRecipe::state_one_hot(kNumStates);

  Mat truth(depth, kNumStates);
  for (int h = 1; h <= depth; ++h)
    for (int s = 1; s <= kNumStates; ++s)
      truth(h - 1, s - 1) = true_unconditional(cfg.boundary, h, s);
  Mat truth_by_horizon(cfg.horizons.size(), kNumStates);
  for (size_t hi = 0; hi < cfg.horizons.size(); ++hi)
    truth_by_horizon.row(hi) = truth.row(cfg.horizons[hi] - 1);

  struct RunOut {
    std::vector<double> mc, td;  // rmse per horizon
    double one_step_diff = 0.0;
    bool converged = true;
  };

  Exp1Result result;
  result.lengths = cfg.lengths;
  result.horizons = cfg.horizons;
  result.cells.resize(cfg.lengths.size());

  for (size_t li = 0; li < cfg.lengths.size(); ++li) {
    const int length = cfg.lengths[li];
    std::vector<RunOut> outs(cfg.runs);
    detail::parallel_runs(cfg.runs, [&](int run) {
      const std::uint64_t run_seed =
          derive_seed(cfg.seed, li * static_cast<std::uint64_t>(cfg.runs) + run);
      const Trace trace =
          generate_trace(ObsMode::kFullState, cfg.boundary, length, run_seed);
      const Vec w = detail::state_weights_for(cfg, trace);

      BatchResult td = train_batch(
          trace.steps(), q,
          AnswerNet::zeros(depth, recipe, Activation::kIdentity),
          cfg.batch.alpha, cfg.batch.max_sweeps, cfg.batch.tolerance);
      const Mat td_table = prediction_table(td.net, ObsMode::kFullState);
      const McTable mc = mc_unconditional_batch(trace.steps(), cfg.horizons);

      RunOut out;
      out.converged = td.converged;
      for (size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        const int h = cfg.horizons[hi];
        const int row[] = {h - 1};
        out.td.push_back(rmse(td_table, truth, w, row));
        const int mc_row[] = {static_cast<int>(hi)};
        out.mc.push_back(rmse(mc.pred, truth_by_horizon, w, mc_row));
        if (h == 1)
          out.one_step_diff =
              (mc.pred.row(hi) - td_table.row(0)).cwiseAbs().maxCoeff();
      }
      outs[run] = std::move(out);
    });

    result.cells[li].resize(cfg.horizons.size());
    for (size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
      std::vector<double> mc_vals, td_vals;
      for (const auto& o : outs) {
        mc_vals.push_back(o.mc[hi]);
        td_vals.push_back(o.td[hi]);
      }
      Exp1Cell& cell = result.cells[li][hi];
      cell.mc = detail::mean(mc_vals);
      cell.mc_se = detail::standard_error(mc_vals);
      cell.td = detail::mean(td_vals);
      cell.td_se = detail::standard_error(td_vals);
    }
    for (const auto& o : outs) {
      result.max_one_step_diff =
          std::max(result.max_one_step_diff, o.one_step_diff);
      result.all_converged = result.all_converged && o.converged;
    }
  }

  MetaInfo meta = detail::base_meta(cfg);
  meta.set("experiment", "exp1")
      .set("batch_alpha", fmt(cfg.batch.alpha, "%g"))
      .set("batch_tolerance", fmt(cfg.batch.tolerance, "%g"));
  const auto path = std::filesystem::path(cfg.out) / "exp1_rmse.csv";
  auto out = open_artifact(path, meta);
  out << "steps";
  for (size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
    const int h = cfg.horizons[hi];
    if (h == 1)
      out << ",h1,h1_se";
    else
      out << ",mc_h" << h << ",mc_h" << h << "_se"
          << ",td_h" << h << ",td_h" << h << "_se";
  }
  out << '\n';
  for (size_t li = 0; li < cfg.lengths.size(); ++li) {
    out << cfg.lengths[li];
    for (size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
      const Exp1Cell& c = result.cells[li][hi];
      if (cfg.horizons[hi] == 1)
        out << ',' << fmt(c.td) << ',' << fmt(c.td_se);
      else
        out << ',' << fmt(c.mc) << ',' << fmt(c.mc_se) << ',' << fmt(c.td)
            << ',' << fmt(c.td_se);
    }
    out << '\n';
  }
  result.artifact = path.string();
  return result;
}

// ---------------------------------------------------------------------------
// Experiment 2: action-conditional prediction. Online RMSE at checkpoints
// and batch proportion of incorrect predictions, both on matched traces.
// ---------------------------------------------------------------------------

struct Exp2Result {
  std::vector<int> checkpoints;
  // [checkpoint][depth-1]; group 1 is the shared MC/TD column.
  std::vector<std::vector<double>> online_td, online_mc;
  double max_one_step_diff = 0.0;
  int td_all_zero_runs = 0;      // runs with exact-zero TD RMSE, groups >= 2,
                                 // at the probe checkpoint (400 if present)
  std::vector<int> mc_positive_runs;  // per depth group, at last checkpoint
  int probe_checkpoint = 0;
  std::vector<int> lengths;
  std::vector<double> batch_mc_incorrect, batch_td_incorrect;  // percent
  bool all_converged = true;
  std::string online_artifact, batch_artifact;
};

inline Exp2Result run_exp2(const ExperimentConfig& cfg) {
  const int depth = cfg.tree_depth;
  const QuestionNet q = build_action_tree(
      walk_action_labels(), depth, observation_width(ObsMode::kFullState));
  const FeatureRecipe recipe = FeatureRecipe::state_one_hot(kNumStates);
  const double alpha = cfg.alphas.front();

  Mat truth(q.size(), kNumStates);
  {
    const auto seqs = action_sequences(q.num_actions(), depth);
    for (size_t i = 0; i < seqs.size(); ++i)
      for (int s = 1; s <= kNumStates; ++s)
        truth(i, s - 1) = true_conditional(cfg.boundary, seqs[i], s);
  }
  std::vector<std::vector<int>> groups;
  for (int d = 1; d <= depth; ++d)
    groups.push_back(tree_depth_group(q.num_actions(), d));

  Exp2Result result;
  result.checkpoints = cfg.checkpoints;
  result.lengths = cfg.lengths;
  const int stream_length =
      *std::max_element(cfg.checkpoints.begin(), cfg.checkpoints.end());
  const int probe_cp = [&] {
    for (int cp : cfg.checkpoints)
      if (cp == 400) return cp;
    return cfg.checkpoints.back();
  }();
  result.probe_checkpoint = probe_cp;

  struct RunOut {
    std::vector<std::vector<double>> td, mc;  // [checkpoint][group]
    double one_step_diff = 0.0;
    bool td_zero_at_probe = false;
    std::vector<bool> mc_positive;  // per group at last checkpoint
  };
  std::vector<RunOut> outs(cfg.runs);

  detail::parallel_runs(cfg.runs, [&](int run) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, run);
    const Trace trace = generate_trace(ObsMode::kFullState, cfg.boundary,
                                       stream_length, run_seed);
    const Vec w = detail::state_weights_for(cfg, trace);

    RunOut out;
    out.td.resize(cfg.checkpoints.size());
    out.mc.resize(cfg.checkpoints.size());

    // Online TD: snapshot the error table as each checkpoint's final update
    // lands (checkpoint T covers updates through t = T-1).
    size_t next_cp = 0;
    StepObserver observer = [&](int t, const TdLearner& learner) {
      while (next_cp < cfg.checkpoints.size() &&
             t == cfg.checkpoints[next_cp] - 1) {
        const Mat table = prediction_table(learner.net(), ObsMode::kFullState);
        for (const auto& g : groups)
          out.td[next_cp].push_back(rmse(table, truth, w, g));
        ++next_cp;
      }
    };
    train_online(trace.steps(), q,
                 AnswerNet::zeros(q.size(), recipe, Activation::kIdentity),
                 alpha, observer);

    // Monte Carlo on the identical trace, re-run per checkpoint prefix.
    for (size_t ci = 0; ci < cfg.checkpoints.size(); ++ci) {
      const int cp = cfg.checkpoints[ci];
      const McTable mc = mc_conditional_online(
          trace.steps().subspan(0, cp), q.num_actions(), depth, alpha);
      for (const auto& g : groups)
        out.mc[ci].push_back(rmse(mc.pred, truth, w, g));
      if (cp == probe_cp) {
        bool all_zero = true;
        for (int d = 2; d <= depth; ++d)
          all_zero = all_zero && out.td[ci][d - 1] < 1e-15;
        out.td_zero_at_probe = all_zero;
      }
      if (ci + 1 == cfg.checkpoints.size()) {
        for (int d = 1; d <= depth; ++d)
          out.mc_positive.push_back(out.mc[ci][d - 1] > 0.0);
        out.one_step_diff = std::abs(out.mc[ci][0] - out.td[ci][0]);
      }
    }
    outs[run] = std::move(out);
  });

  result.online_td.assign(cfg.checkpoints.size(),
                          std::vector<double>(depth, 0.0));
  result.online_mc = result.online_td;
  result.mc_positive_runs.assign(depth, 0);
  for (const auto& o : outs) {
    for (size_t ci = 0; ci < cfg.checkpoints.size(); ++ci)
      for (int d = 0; d < depth; ++d) {
        result.online_td[ci][d] += o.td[ci][d] / cfg.runs;
        result.online_mc[ci][d] += o.mc[ci][d] / cfg.runs;
      }
    if (o.td_zero_at_probe) ++result.td_all_zero_runs;
    for (int d = 0; d < depth; ++d)
      if (o.mc_positive[d]) ++result.mc_positive_runs[d];
    result.max_one_step_diff =
        std::max(result.max_one_step_diff, o.one_step_diff);
  }

  // Batch incorrect-prediction proportions per data size, matched traces.
  struct BatchOut {
    double mc = 0.0, td = 0.0;
    bool converged = true;
  };
  result.batch_mc_incorrect.resize(cfg.lengths.size());
  result.batch_td_incorrect.resize(cfg.lengths.size());
  for (size_t li = 0; li < cfg.lengths.size(); ++li) {
    std::vector<BatchOut> bouts(cfg.runs);
    detail::parallel_runs(cfg.runs, [&](int run) {
      const std::uint64_t run_seed = derive_seed(
          cfg.seed, (1ull << 32) + li * static_cast<std::uint64_t>(cfg.runs) +
                        run);
      const Trace trace = generate_trace(ObsMode::kFullState, cfg.boundary,
                                         cfg.lengths[li], run_seed);
      BatchResult td = train_batch(
          trace.steps(), q,
          AnswerNet::zeros(q.size(), recipe, Activation::kIdentity),
          cfg.batch.alpha, cfg.batch.max_sweeps, cfg.batch.tolerance);
      const McTable mc =
          mc_conditional_batch(trace.steps(), q.num_actions(), depth);
      bouts[run] = {incorrect_proportion(mc.pred, truth),
                    incorrect_proportion(
                        prediction_table(td.net, ObsMode::kFullState), truth),
                    td.converged};
    });
    double mc_acc = 0.0, td_acc = 0.0;
    for (const auto& b : bouts) {
      mc_acc += b.mc / cfg.runs;
      td_acc += b.td / cfg.runs;
      result.all_converged = result.all_converged && b.converged;
    }
    result.batch_mc_incorrect[li] = mc_acc;
    result.batch_td_incorrect[li] = td_acc;
  }

  MetaInfo meta = detail::base_meta(cfg);
  meta.set("experiment", "exp2")
      .set("alpha", fmt(alpha, "%g"))
      .set("tree_depth", static_cast<std::uint64_t>(depth));
  {
    const auto path = std::filesystem::path(cfg.out) / "exp2_online_rmse.csv";
    auto out = open_artifact(path, meta);
    out << "time,h1";
    for (int d = 2; d <= depth; ++d) out << ",mc_h" << d << ",td_h" << d;
    out << '\n';
    for (size_t ci = 0; ci < cfg.checkpoints.size(); ++ci) {
      out << cfg.checkpoints[ci] << ',' << fmt(result.online_td[ci][0]);
      for (int d = 2; d <= depth; ++d)
        out << ',' << fmt(result.online_mc[ci][d - 1]) << ','
            << fmt(result.online_td[ci][d - 1]);
      out << '\n';
    }
    result.online_artifact = path.string();
  }
  {
    const auto path =
        std::filesystem::path(cfg.out) / "exp2_batch_incorrect.csv";
    auto out = open_artifact(path, meta);
    out << "steps,mc_incorrect_pct,td_incorrect_pct\n";
    for (size_t li = 0; li < cfg.lengths.size(); ++li)
      out << cfg.lengths[li] << ',' << fmt(result.batch_mc_incorrect[li]) << ','
          << fmt(result.batch_td_incorrect[li]) << '\n';
    result.batch_artifact = path.string();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Experiment 3: predictive state representation on the bit-only walk.
// ---------------------------------------------------------------------------

struct Exp3Curve {
  int depth = 0;
  double alpha = 0.0;
  std::vector<double> true_rmse;       // per bin, averaged over runs
  std::vector<double> empirical_rmse;  // per bin, averaged over runs
};

struct Exp3Result {
  std::vector<Exp3Curve> curves;
  int bin_size = 0;
  long steps = 0;
  std::string artifact;
};

inline Exp3Result run_exp3(const ExperimentConfig& cfg) {
  Exp3Result result;
  result.bin_size = cfg.bin_size;
  result.steps = cfg.steps;
  const long num_bins = cfg.steps / cfg.bin_size;
  if (num_bins < 1) throw ConfigError("config: steps smaller than one bin");

  for (int depth : cfg.depths) {
    const QuestionNet q = build_action_tree(
        walk_action_labels(), depth, observation_width(ObsMode::kBitOnly));
    const FeatureRecipe recipe = FeatureRecipe::bias_pair_prev(q.size());
    const FixedPointResult oracle =
        extensive_fixed_point(q, ObsMode::kBitOnly, cfg.boundary);
    if (!oracle.converged)
      throw std::runtime_error("exp3: oracle fixed point did not converge");
    const Mat& truth = oracle.table.values;

    for (double alpha : cfg.alphas) {
      struct RunBins {
        std::vector<double> true_sq, emp_sq;  // summed squared error per bin
      };
      std::vector<RunBins> outs(cfg.runs);
      detail::parallel_runs(cfg.runs, [&](int run) {
        // the same walk sequences are presented to every (depth, alpha)
        const std::uint64_t run_seed = derive_seed(cfg.seed, run);
        RandomWalkEnv env(ObsMode::kBitOnly, cfg.boundary);
        RandomPolicy policy(run_seed);
        TdLearner learner(
            AnswerNet::zeros(q.size(), recipe, Activation::kLogistic), q,
            alpha);
        learner.start(env.reset());

        RunBins bins;
        bins.true_sq.assign(num_bins, 0.0);
        bins.emp_sq.assign(num_bins, 0.0);
        for (long t = 1; t <= num_bins * cfg.bin_size; ++t) {
          const long bin = (t - 1) / cfg.bin_size;
          const int state = env.hidden_state();
          const Vec& y = learner.predictions();  // y_t
          bins.true_sq[bin] +=
              (y - truth.col(state - 1)).squaredNorm() / q.size();
          const ActionId a = policy.sample();
          const double one_step_pred = y[a];
          const Vec obs_next = env.step(a);
          const double e = one_step_pred - obs_next[0];
          bins.emp_sq[bin] += e * e;
          learner.step(a, obs_next);
        }
        outs[run] = std::move(bins);
      });

      Exp3Curve curve;
      curve.depth = depth;
      curve.alpha = alpha;
      curve.true_rmse.assign(num_bins, 0.0);
      curve.empirical_rmse.assign(num_bins, 0.0);
      for (const auto& o : outs)
        for (long b = 0; b < num_bins; ++b) {
          curve.true_rmse[b] +=
              std::sqrt(o.true_sq[b] / cfg.bin_size) / cfg.runs;
          curve.empirical_rmse[b] +=
              std::sqrt(o.emp_sq[b] / cfg.bin_size) / cfg.runs;
        }
      result.curves.push_back(std::move(curve));
    }
  }

  MetaInfo meta = detail::base_meta(cfg);
  meta.set("experiment", "exp3")
      .set("steps", static_cast<std::uint64_t>(cfg.steps))
      .set("bin_size", static_cast<std::uint64_t>(cfg.bin_size));
  const auto path = std::filesystem::path(cfg.out) / "exp3_curves.csv";
  auto out = open_artifact(path, meta);
  out << "depth,alpha,bin,bin_start,true_rmse,empirical_rmse\n";
  for (const auto& c : result.curves)
    for (size_t b = 0; b < c.true_rmse.size(); ++b)
      out << c.depth << ',' << fmt(c.alpha, "%g") << ',' << b << ','
          << (b * cfg.bin_size + 1) << ',' << fmt(c.true_rmse[b]) << ','
          << fmt(c.empirical_rmse[b]) << '\n';
  result.artifact = path.string();
  return result;
}

// ---------------------------------------------------------------------------
// Free-form runs: any question network (built or loaded) on the walk.
// ---------------------------------------------------------------------------

struct CustomResult {
  std::vector<double> run_rmse_uniform, run_rmse_visitation;
  std::vector<bool> run_converged;
  std::vector<int> run_sweeps;
  std::vector<double> mean_curve;  // online mode: binned true RMSE
  bool all_converged = true;
  std::string summary_artifact;
};

inline CustomResult run_custom(const ExperimentConfig& cfg) {
  const QuestionNet q = [&] {
    if (!cfg.qnet_file.empty()) return load_qnet(cfg.qnet_file);
    if (cfg.qnet_builder == "chain")
      return build_chain(cfg.qnet_depth,
                         cfg.obs_mode == "bit_only"
                             ? observation_width(ObsMode::kBitOnly)
                             : observation_width(ObsMode::kFullState));
    return build_action_tree(walk_action_labels(), cfg.qnet_depth,
                             cfg.obs_mode == "bit_only"
                                 ? observation_width(ObsMode::kBitOnly)
                                 : observation_width(ObsMode::kFullState));
  }();

  // observation mode must match the network's declared width
  ObsMode mode;
  if (q.observation_width() == observation_width(ObsMode::kFullState))
    mode = ObsMode::kFullState;
  else if (q.observation_width() == observation_width(ObsMode::kBitOnly))
    mode = ObsMode::kBitOnly;
  else
    throw ConfigError("config: question net declares observation width " +
                      std::to_string(q.observation_width()) +
                      "; the walk provides 8 (full_state) or 1 (bit_only)");
  if (!cfg.obs_mode.empty() &&
      mode != (cfg.obs_mode == "bit_only" ? ObsMode::kBitOnly
                                          : ObsMode::kFullState))
    throw ConfigError("config: obs_mode conflicts with the question network");
  if (q.num_actions() != 2)
    throw ConfigError("config: the walk needs a two-action question network");

  const Activation act =
      cfg.activation == "logistic" ? Activation::kLogistic
                                   : Activation::kIdentity;
  const FeatureRecipe recipe = [&] {
    if (cfg.features == "bias_pair_prev")
      return FeatureRecipe::bias_pair_prev(q.size());
    if (cfg.features == "state_one_hot" || cfg.features.empty()) {
      if (mode == ObsMode::kBitOnly)
        throw ConfigError(
            "config: state_one_hot features need full_state observations");
      return FeatureRecipe::state_one_hot(kNumStates);
    }
    throw ConfigError("config: unknown features '" + cfg.features + "'");
  }();

  const FixedPointResult oracle =
      extensive_fixed_point(q, mode, cfg.boundary);
  const Mat& truth = oracle.table.values;
  const double alpha = cfg.alphas.front();
  const long num_bins = std::max(1L, cfg.steps / cfg.bin_size);

  CustomResult result;
  result.run_rmse_uniform.resize(cfg.runs);
  result.run_rmse_visitation.resize(cfg.runs);
  result.run_converged.assign(cfg.runs, true);
  result.run_sweeps.assign(cfg.runs, 0);
  std::vector<std::vector<double>> curves(cfg.runs);
  std::vector<AnswerNet> final_nets(cfg.runs);

  detail::parallel_runs(cfg.runs, [&](int run) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, run);
    RandomWalkEnv env(mode, cfg.boundary);
    RandomPolicy policy(run_seed);

    if (cfg.mode == "batch") {
      const Trace trace = generate_trace(env, policy,
                                         static_cast<int>(cfg.steps));
      BatchResult br =
          train_batch(trace.steps(), q, AnswerNet::zeros(q.size(), recipe, act),
                      cfg.batch.alpha, cfg.batch.max_sweeps,
                      cfg.batch.tolerance);
      result.run_converged[run] = br.converged;
      result.run_sweeps[run] = br.sweeps;
      if (recipe == FeatureRecipe::state_one_hot(kNumStates)) {
        const Mat table = prediction_table(br.net, mode);
        result.run_rmse_uniform[run] =
            rmse(table, truth, uniform_state_weights());
        result.run_rmse_visitation[run] =
            rmse(table, truth, visitation_weights(trace));
      } else {
        // recurrent features have no state-indexed readout; replay the
        // trace with the converged weights (visitation-weighted by nature)
        const double r = replay_rmse(trace, q, br.net, truth);
        result.run_rmse_uniform[run] = r;
        result.run_rmse_visitation[run] = r;
      }
      final_nets[run] = std::move(br.net);
      if (cfg.export_traces) {
        MetaInfo meta = detail::base_meta(cfg);
        meta.set("run", static_cast<std::uint64_t>(run));
        auto tout = open_artifact(std::filesystem::path(cfg.out) /
                                      ("trace_run" + std::to_string(run) +
                                       ".csv"),
                                  meta);
        export_trace_csv(trace, q.action_labels(), tout);
      }
    } else {
      TdLearner learner(AnswerNet::zeros(q.size(), recipe, act), q, alpha);
      learner.start(env.reset());
      std::vector<double> bins(num_bins, 0.0);
      for (long t = 1; t <= num_bins * cfg.bin_size; ++t) {
        const long bin = (t - 1) / cfg.bin_size;
        const int state = env.hidden_state();
        bins[bin] += (learner.predictions() - truth.col(state - 1))
                         .squaredNorm() /
                     q.size();
        const ActionId a = policy.sample();
        const Vec obs_next = env.step(a);
        learner.step(a, obs_next);
      }
      for (long b = 0; b < num_bins; ++b)
        bins[b] = std::sqrt(bins[b] / cfg.bin_size);
      curves[run] = std::move(bins);
      // the per-step metric is visitation-weighted by construction
      result.run_rmse_uniform[run] = curves[run].back();
      result.run_rmse_visitation[run] = curves[run].back();
      final_nets[run] = learner.release_net();
    }
  });

  for (bool c : result.run_converged)
    result.all_converged = result.all_converged && c;

  MetaInfo meta = detail::base_meta(cfg);
  meta.set("experiment", "custom")
      .set("mode", cfg.mode)
      .set("alpha", fmt(alpha, "%g"))
      .set("oracle_iterations", static_cast<std::uint64_t>(oracle.iterations));
  {
    auto out = open_artifact(std::filesystem::path(cfg.out) / "oracle.csv",
                             meta);
    export_oracle_csv(oracle.table, out);
  }
  {
    auto out = open_artifact(std::filesystem::path(cfg.out) / "weights_run0.csv",
                             meta);
    export_weights_csv(final_nets[0], out);
  }
  if (cfg.mode == "online") {
    result.mean_curve.assign(num_bins, 0.0);
    for (int run = 0; run < cfg.runs; ++run)
      for (long b = 0; b < num_bins; ++b)
        result.mean_curve[b] += curves[run][b] / cfg.runs;
    auto out =
        open_artifact(std::filesystem::path(cfg.out) / "curve.csv", meta);
    out << "bin,bin_start,true_rmse\n";
    for (long b = 0; b < num_bins; ++b)
      out << b << ',' << (b * cfg.bin_size + 1) << ','
          << fmt(result.mean_curve[b]) << '\n';
  }
  if (cfg.mode == "batch" &&
      recipe == FeatureRecipe::state_one_hot(kNumStates)) {
    auto out = open_artifact(
        std::filesystem::path(cfg.out) / "predictions.csv", meta);
    out << "run,state,node_label,prediction\n";
    for (int run = 0; run < cfg.runs; ++run) {
      const Mat table = prediction_table(final_nets[run], mode);
      for (int s = 1; s <= kNumStates; ++s)
        for (int i = 0; i < q.size(); ++i)
          out << run << ',' << s << ',' << q.node(i).label << ','
              << fmt(table(i, s - 1), "%.9g") << '\n';
    }
  }
  {
    const auto path = std::filesystem::path(cfg.out) / "summary.csv";
    auto out = open_artifact(path, meta);
    out << "run,converged,sweeps,rmse_uniform,rmse_visitation\n";
    for (int run = 0; run < cfg.runs; ++run)
      out << run << ',' << (result.run_converged[run] ? 1 : 0) << ','
          << result.run_sweeps[run] << ','
          << fmt(result.run_rmse_uniform[run]) << ','
          << fmt(result.run_rmse_visitation[run]) << '\n';
    result.summary_artifact = path.string();
  }
  return result;
}

}  // namespace tdnet
