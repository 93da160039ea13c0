// Monte Carlo baselines: the same predictions as the TD networks, learned by
// waiting for the actual outcome in the sequence. The walk's state is read
// from the one-hot block of full observations, never from hidden annotations.
#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <vector>

#include "tdnet/env.hpp"
#include "tdnet/qnet.hpp"

namespace tdnet {

/// Predictions per (node-or-horizon, state); counts record how many updates
/// each cell received. Cells never updated stay at the zero initialization.
struct McTable {
  Mat pred;                // rows x 7, column s-1 holds state s
  Eigen::MatrixXi counts;  // same shape

  static McTable zeros(int rows) {
    return {Mat::Zero(rows, kNumStates),
            Eigen::MatrixXi::Zero(rows, kNumStates)};
  }
};

/// Sample-mean solution of the h-step regression: each visit of state s at a
/// position with the outcome still inside the recorded data contributes the
/// special bit h steps later. Equivalent to the converged delta rule.
inline McTable mc_unconditional_batch(std::span<const TraceStep> steps,
                                      std::span<const int> horizons) {
  McTable table = McTable::zeros(static_cast<int>(horizons.size()));
  Mat sums = Mat::Zero(table.pred.rows(), kNumStates);
  const int length = static_cast<int>(steps.size());
  for (int t = 0; t < length; ++t) {
    const int s = state_from_observation(steps[t].obs);
    for (size_t hi = 0; hi < horizons.size(); ++hi) {
      const int h = horizons[hi];
      if (h < 1) throw std::invalid_argument("mc: horizon must be >= 1");
      if (t + h < length) {
        sums(hi, s - 1) += steps[t + h].obs[0];
        table.counts(hi, s - 1) += 1;
      }
    }
  }
  for (int r = 0; r < table.pred.rows(); ++r)
    for (int sc = 0; sc < kNumStates; ++sc)
      if (table.counts(r, sc) > 0)
        table.pred(r, sc) = sums(r, sc) / table.counts(r, sc);
  return table;
}

/// Online delta rule: as each observation arrives, every prediction whose
/// target it completes is nudged toward it. Predictions whose targets lie
/// beyond the end of the data are silently never updated.
inline McTable mc_unconditional_online(std::span<const TraceStep> steps,
                                       std::span<const int> horizons,
                                       double alpha) {
  McTable table = McTable::zeros(static_cast<int>(horizons.size()));
  const int length = static_cast<int>(steps.size());
  for (int u = 0; u < length; ++u) {
    const double outcome = steps[u].obs[0];
    for (size_t hi = 0; hi < horizons.size(); ++hi) {
      const int t = u - horizons[hi];
      if (t < 0) continue;
      const int s = state_from_observation(steps[t].obs);
      table.pred(hi, s - 1) += alpha * (outcome - table.pred(hi, s - 1));
      table.counts(hi, s - 1) += 1;
    }
  }
  return table;
}

/// Action-conditional predictions, one row per sequence in the shared
/// breadth-first ordering. A cell updates only at positions where its entire
/// action sequence occurs; with alpha = 1 on the deterministic walk a single
/// occurrence makes it exact.
inline McTable mc_conditional_online(std::span<const TraceStep> steps,
                                     int num_actions, int depth,
                                     double alpha) {
  const auto seqs = action_sequences(num_actions, depth);
  McTable table = McTable::zeros(static_cast<int>(seqs.size()));
  const int length = static_cast<int>(steps.size());
  for (int t = 0; t < length; ++t) {
    const int s = state_from_observation(steps[t].obs);
    for (int k = 1; k <= depth && t + k < length; ++k) {
      std::vector<ActionId> window(k);
      for (int j = 0; j < k; ++j) window[j] = steps[t + j].action;
      const int node = action_tree_index(num_actions, window);
      const double outcome = steps[t + k].obs[0];
      table.pred(node, s - 1) += alpha * (outcome - table.pred(node, s - 1));
      table.counts(node, s - 1) += 1;
    }
  }
  return table;
}

/// Closed-form batch variant: sample mean per (state, sequence).
inline McTable mc_conditional_batch(std::span<const TraceStep> steps,
                                    int num_actions, int depth) {
  const auto seqs = action_sequences(num_actions, depth);
  McTable table = McTable::zeros(static_cast<int>(seqs.size()));
  Mat sums = Mat::Zero(table.pred.rows(), kNumStates);
  const int length = static_cast<int>(steps.size());
  for (int t = 0; t < length; ++t) {
    const int s = state_from_observation(steps[t].obs);
    for (int k = 1; k <= depth && t + k < length; ++k) {
      std::vector<ActionId> window(k);
      for (int j = 0; j < k; ++j) window[j] = steps[t + j].action;
      const int node = action_tree_index(num_actions, window);
      sums(node, s - 1) += steps[t + k].obs[0];
      table.counts(node, s - 1) += 1;
    }
  }
  for (int r = 0; r < table.pred.rows(); ++r)
    for (int sc = 0; sc < kNumStates; ++sc)
      if (table.counts(r, sc) > 0)
        table.pred(r, sc) = sums(r, sc) / table.counts(r, sc);
  return table;
}

}  // namespace tdnet
