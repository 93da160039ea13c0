// The seven-state continuing random walk, the uniform behavior policy, and
// recorded experience traces.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "tdnet/qnet.hpp"

namespace tdnet {

inline constexpr int kNumStates = 7;
inline constexpr int kCenterState = 4;
inline constexpr ActionId kLeft = 0;
inline constexpr ActionId kRight = 1;

enum class ObsMode { kFullState, kBitOnly };

/// What happens when the chosen action points off an end of the walk.
enum class BoundaryRule { kStayInPlace, kReflect };

inline const std::vector<std::string>& walk_action_labels() {
  static const std::vector<std::string> labels = {"L", "R"};
  return labels;
}

/// Deterministic walk dynamics, shared by the environment and the oracles.
inline int next_state(int state, ActionId a, BoundaryRule rule) {
  const int delta = a == kLeft ? -1 : +1;
  int s = state + delta;
  if (s < 1 || s > kNumStates) {
    switch (rule) {
      case BoundaryRule::kStayInPlace: s = state; break;
      case BoundaryRule::kReflect: s = state - delta; break;
    }
  }
  return s;
}

inline double special_bit(int state) {
  return state == 1 || state == kNumStates ? 1.0 : 0.0;
}

/// Observation for a hidden state: the special bit alone, or the special bit
/// followed by the one-hot state block.
inline Vec make_observation(int state, ObsMode mode) {
  if (mode == ObsMode::kBitOnly) {
    Vec o(1);
    o[0] = special_bit(state);
    return o;
  }
  Vec o = Vec::Zero(1 + kNumStates);
  o[0] = special_bit(state);
  o[state] = 1.0;  // state s occupies bit s (bit 0 is the special bit)
  return o;
}

inline int observation_width(ObsMode mode) {
  return mode == ObsMode::kBitOnly ? 1 : 1 + kNumStates;
}

/// Continuing task: no terminal states, reaching an end never interrupts
/// experience. Single-owner mutable value; create one per run.
class RandomWalkEnv {
 public:
  explicit RandomWalkEnv(ObsMode mode = ObsMode::kFullState,
                         BoundaryRule boundary = BoundaryRule::kStayInPlace)
      : mode_(mode), boundary_(boundary) {}

  /// Move to the center state and return its observation.
  Vec reset() {
    state_ = kCenterState;
    return observation();
  }

  Vec step(ActionId a) {
    if (a != kLeft && a != kRight)
      throw std::invalid_argument("step: unknown action");
    state_ = next_state(state_, a, boundary_);
    return observation();
  }

  Vec observation() const { return make_observation(state_, mode_); }
  int hidden_state() const { return state_; }
  ObsMode obs_mode() const { return mode_; }
  BoundaryRule boundary() const { return boundary_; }
  int observation_width() const { return tdnet::observation_width(mode_); }

 private:
  int state_ = kCenterState;
  ObsMode mode_;
  BoundaryRule boundary_;
};

/// Uniform random choice over {L, R}, seeded per run.
class RandomPolicy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  ActionId sample() { return static_cast<ActionId>(rng_() & 1u); }

 private:
  std::mt19937_64 rng_;
};

/// One recorded step: the observation on arrival and the action then taken.
/// This is all a learner may see.
struct TraceStep {
  Vec obs;
  ActionId action;
};

/// Experience o1,a1,o2,a2,... plus hidden-state annotations. The annotations
/// are exposed through a separate accessor used only for evaluation; learner
/// entry points accept the steps() span and never receive them.
class Trace {
 public:
  Trace() = default;
  Trace(std::vector<TraceStep> steps, std::vector<int> hidden)
      : steps_(std::move(steps)), hidden_(std::move(hidden)) {
    if (steps_.size() != hidden_.size())
      throw std::invalid_argument("trace: annotation length mismatch");
  }

  std::span<const TraceStep> steps() const { return steps_; }
  const std::vector<int>& hidden_states() const { return hidden_; }
  int length() const { return static_cast<int>(steps_.size()); }

 private:
  std::vector<TraceStep> steps_;
  std::vector<int> hidden_;
};

/// Record `length` (observation, action) pairs starting from a reset
/// environment. A pure function of the policy's seed.
inline Trace generate_trace(RandomWalkEnv& env, RandomPolicy& policy,
                            int length) {
  if (length < 1) throw std::invalid_argument("generate_trace: length < 1");
  std::vector<TraceStep> steps;
  std::vector<int> hidden;
  steps.reserve(length);
  hidden.reserve(length);
  env.reset();
  for (int t = 0; t < length; ++t) {
    const Vec obs = env.observation();
    const int state = env.hidden_state();
    const ActionId a = policy.sample();
    steps.push_back(TraceStep{obs, a});
    hidden.push_back(state);
    env.step(a);
  }
  return Trace(std::move(steps), std::move(hidden));
}

inline Trace generate_trace(ObsMode mode, BoundaryRule boundary, int length,
                            std::uint64_t seed) {
  RandomWalkEnv env(mode, boundary);
  RandomPolicy policy(seed);
  return generate_trace(env, policy, length);
}

/// State index encoded in a full observation's one-hot block.
inline int state_from_observation(const Vec& obs) {
  if (obs.size() != 1 + kNumStates)
    throw std::invalid_argument(
        "state_from_observation: needs a full-state observation");
  for (int s = 1; s <= kNumStates; ++s)
    if (obs[s] != 0.0) return s;
  throw std::invalid_argument("state_from_observation: no state bit set");
}

}  // namespace tdnet
