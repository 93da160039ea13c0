// Exact prediction targets for the walk, computed from full knowledge of the
// chain, plus the error metrics every experiment reports against them.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdnet/anet.hpp"
#include "tdnet/env.hpp"
#include "tdnet/qnet.hpp"

namespace tdnet {

/// Transition matrix of the walk under the uniform random policy;
/// P(s, s') = probability of moving from state s to s' in one step.
inline Mat transition_matrix(BoundaryRule rule) {
  Mat P = Mat::Zero(kNumStates, kNumStates);
  for (int s = 1; s <= kNumStates; ++s)
    for (ActionId a : {kLeft, kRight})
      P(s - 1, next_state(s, a, rule) - 1) += 0.5;
  return P;
}

/// Stationary distribution of P by power iteration.
inline Vec stationary_distribution(const Mat& P, int iterations = 100000,
                                   double tol = 1e-14) {
  Vec pi = Vec::Constant(P.rows(), 1.0 / P.rows());
  for (int it = 0; it < iterations; ++it) {
    Vec next = P.transpose() * pi;
    next /= next.sum();
    if ((next - pi).cwiseAbs().maxCoeff() < tol) return next;
    pi = std::move(next);
  }
  return pi;
}

/// Probability the special bit is 1 exactly `horizon` steps ahead of state
/// `s`, by backward value iteration with the transition matrix.
inline double true_unconditional(BoundaryRule rule, int horizon, int s) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (s < 1 || s > kNumStates) throw std::invalid_argument("state out of range");
  const Mat P = transition_matrix(rule);
  Vec w(kNumStates);
  for (int i = 0; i < kNumStates; ++i) w[i] = special_bit(i + 1);
  for (int k = 0; k < horizon; ++k) w = P * w;
  return w[s - 1];
}

/// The same probability by exhaustive enumeration of every action sequence
/// of the given length. Exponential in the horizon; the independent check
/// for the matrix-power route.
inline double true_unconditional_enumerated(BoundaryRule rule, int horizon,
                                            int s) {
  if (horizon < 1 || horizon > 24)
    throw std::invalid_argument("enumeration horizon out of range");
  const long total = 1L << horizon;
  double acc = 0.0;
  for (long code = 0; code < total; ++code) {
    int state = s;
    for (int k = 0; k < horizon; ++k)
      state = next_state(state, static_cast<ActionId>((code >> k) & 1), rule);
    acc += special_bit(state);
  }
  return acc / static_cast<double>(total);
}

/// Deterministic outcome of running an action sequence from a state.
inline int true_conditional(BoundaryRule rule, std::span<const ActionId> seq,
                            int s) {
  if (seq.empty()) throw std::invalid_argument("empty action sequence");
  int state = s;
  for (ActionId a : seq) state = next_state(state, a, rule);
  return special_bit(state) != 0.0 ? 1 : 0;
}

/// Exact prediction per (node, hidden state); column s-1 holds state s.
struct OracleTable {
  Mat values;  // n x 7
  std::vector<std::string> node_labels;
};

struct FixedPointResult {
  OracleTable table;
  bool converged = false;
  long iterations = 0;
};

/// Solve the self-consistency equations of a question network over the
/// walk's hidden states: each node's true value is the expectation, under
/// the uniform policy, of keeping its value where its condition is off and
/// matching its target where it is on. Fixed-point iteration from the zero
/// table; geometric convergence whenever the target weights contract.
inline FixedPointResult extensive_fixed_point(const QuestionNet& q,
                                              ObsMode mode, BoundaryRule rule,
                                              double tol = 1e-12,
                                              long max_iterations = 1000000) {
  if (q.observation_width() != observation_width(mode))
    throw std::invalid_argument(
        "extensive_fixed_point: observation width mismatch");
  if (q.num_actions() != 2)
    throw std::invalid_argument(
        "extensive_fixed_point: the walk has exactly two actions");

  std::vector<Vec> obs(kNumStates);
  int next[kNumStates][2];
  std::vector<Vec> cond(2);
  for (int s = 1; s <= kNumStates; ++s) {
    obs[s - 1] = make_observation(s, mode);
    next[s - 1][kLeft] = next_state(s, kLeft, rule);
    next[s - 1][kRight] = next_state(s, kRight, rule);
  }
  for (ActionId a : {kLeft, kRight}) cond[a] = compute_conditions(q, a);

  Mat Y = Mat::Zero(q.size(), kNumStates);
  Mat Ynew(q.size(), kNumStates);
  long it = 0;
  bool converged = false;
  for (; it < max_iterations; ++it) {
    for (int sc = 0; sc < kNumStates; ++sc) {
      Vec acc = Vec::Zero(q.size());
      for (ActionId a : {kLeft, kRight}) {
        const int s2 = next[sc][a] - 1;
        const Vec z = compute_targets(q, obs[s2], Y.col(s2));
        acc += 0.5 * ((Vec::Ones(q.size()) - cond[a]).cwiseProduct(Y.col(sc)) +
                      cond[a].cwiseProduct(z));
      }
      Ynew.col(sc) = acc;
    }
    const double diff = (Ynew - Y).cwiseAbs().maxCoeff();
    Y.swap(Ynew);
    if (diff < tol) {
      converged = true;
      ++it;
      break;
    }
  }

  OracleTable table;
  table.values = std::move(Y);
  for (int i = 0; i < q.size(); ++i) table.node_labels.push_back(q.node(i).label);
  return {std::move(table), converged, it};
}

enum class Weighting { kUniformStates, kEmpiricalVisitation };

/// State-visit frequencies of a trace, for visitation-weighted errors.
inline Vec visitation_weights(const Trace& trace) {
  Vec w = Vec::Zero(kNumStates);
  for (int s : trace.hidden_states()) w[s - 1] += 1.0;
  if (trace.length() > 0) w /= static_cast<double>(trace.length());
  return w;
}

/// Root weighted mean squared deviation between a learned prediction table
/// and the oracle, over the given node rows (all rows when empty).
inline double rmse(const Mat& predictions, const Mat& truth,
                   const Vec& state_weights,
                   std::span<const int> node_rows = {}) {
  if (predictions.rows() != truth.rows() ||
      predictions.cols() != truth.cols())
    throw std::invalid_argument("rmse: table shape mismatch");
  if (state_weights.size() != predictions.cols())
    throw std::invalid_argument("rmse: weighting length mismatch");
  std::vector<int> all;
  if (node_rows.empty()) {
    all.resize(predictions.rows());
    for (int i = 0; i < predictions.rows(); ++i) all[i] = i;
    node_rows = all;
  }
  double acc = 0.0;
  for (int r : node_rows)
    for (int sc = 0; sc < predictions.cols(); ++sc) {
      const double d = predictions(r, sc) - truth(r, sc);
      acc += state_weights[sc] * d * d;
    }
  return std::sqrt(acc / static_cast<double>(node_rows.size()));
}

inline Vec uniform_state_weights() {
  return Vec::Constant(kNumStates, 1.0 / kNumStates);
}

/// Percentage of cells whose prediction rounds to the wrong binary value.
/// Truths must be binary; predictions >= 0.5 round to 1.
inline double incorrect_proportion(const Mat& predictions, const Mat& truth) {
  if (predictions.rows() != truth.rows() ||
      predictions.cols() != truth.cols())
    throw std::invalid_argument("incorrect_proportion: shape mismatch");
  long wrong = 0;
  for (int r = 0; r < predictions.rows(); ++r)
    for (int sc = 0; sc < predictions.cols(); ++sc) {
      const int rounded = predictions(r, sc) >= 0.5 ? 1 : 0;
      const int t = truth(r, sc) >= 0.5 ? 1 : 0;
      if (truth(r, sc) != 0.0 && truth(r, sc) != 1.0)
        throw std::invalid_argument("incorrect_proportion: non-binary truth");
      if (rounded != t) ++wrong;
    }
  return 100.0 * static_cast<double>(wrong) /
         static_cast<double>(predictions.size());
}

/// Per-step RMSE of a trained net replayed (without learning) along a trace,
/// against the oracle values at the annotated hidden states. This is the
/// evaluation for recurrent feature recipes, where predictions depend on
/// history rather than on the current state alone.
inline double replay_rmse(const Trace& trace, const QuestionNet& q,
                          const AnswerNet& net, const Mat& truth) {
  const auto steps = trace.steps();
  if (steps.empty()) return 0.0;
  Vec x, y;
  build_features_into(x, net.recipe, std::nullopt, steps[0].obs,
                      Vec::Zero(net.num_nodes()));
  forward_into(y, net, x);
  double acc = 0.0;
  for (int t = 0; t < trace.length(); ++t) {
    const int s = trace.hidden_states()[t];
    acc += (y - truth.col(s - 1)).squaredNorm() / q.size();
    if (t + 1 < trace.length()) {
      build_features_into(x, net.recipe, steps[t].action, steps[t + 1].obs, y);
      forward_into(y, net, x);
    }
  }
  return std::sqrt(acc / trace.length());
}

/// Prediction table of a state-feature answer net: column s-1 holds the
/// predictions computed from state s's observation.
inline Mat prediction_table(const AnswerNet& net, ObsMode mode) {
  Mat table(net.num_nodes(), kNumStates);
  for (int s = 1; s <= kNumStates; ++s) {
    const Vec obs = make_observation(s, mode);
    table.col(s - 1) =
        forward(net, build_features(net.recipe, std::nullopt, obs,
                                    Vec::Zero(net.num_nodes())));
  }
  return table;
}

}  // namespace tdnet
