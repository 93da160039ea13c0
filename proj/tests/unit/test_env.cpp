#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tdnet/env.hpp"
#include "tdnet/io.hpp"
#include "tdnet/oracle.hpp"

using namespace tdnet;

TEST_CASE("reset returns the center-state observation") {
  RandomWalkEnv full(ObsMode::kFullState);
  const Vec o = full.reset();
  REQUIRE(o.size() == 8);
  CHECK(o[0] == 0.0);
  for (int s = 1; s <= 7; ++s) CHECK(o[s] == (s == 4 ? 1.0 : 0.0));

  RandomWalkEnv bit(ObsMode::kBitOnly);
  const Vec b = bit.reset();
  REQUIRE(b.size() == 1);
  CHECK(b[0] == 0.0);

  // reset is deterministic: no RNG involved
  RandomWalkEnv again(ObsMode::kFullState);
  again.step(kRight);
  CHECK(again.reset() == o);
}

TEST_CASE("steps move deterministically and flag the ends") {
  RandomWalkEnv env(ObsMode::kFullState);
  env.reset();
  Vec o = env.step(kRight);
  CHECK(env.hidden_state() == 5);
  CHECK(o[0] == 0.0);
  env.step(kRight);
  o = env.step(kRight);
  CHECK(env.hidden_state() == 7);
  CHECK(o[0] == 1.0);

  SECTION("stay-in-place boundary") {
    o = env.step(kRight);
    CHECK(env.hidden_state() == 7);
    CHECK(o[0] == 1.0);
  }
  SECTION("reflect boundary") {
    RandomWalkEnv r(ObsMode::kFullState, BoundaryRule::kReflect);
    r.reset();
    for (int i = 0; i < 3; ++i) r.step(kRight);
    REQUIRE(r.hidden_state() == 7);
    r.step(kRight);
    CHECK(r.hidden_state() == 6);
    for (int i = 0; i < 5; ++i) r.step(kLeft);
    REQUIRE(r.hidden_state() == 1);
    r.step(kLeft);
    CHECK(r.hidden_state() == 2);
  }
}

TEST_CASE("interior moves are reversible") {
  for (int s = 2; s <= 6; ++s) {
    RandomWalkEnv env(ObsMode::kBitOnly);
    env.reset();
    // walk to state s deterministically
    while (env.hidden_state() != s)
      env.step(env.hidden_state() < s ? kRight : kLeft);
    env.step(kLeft);
    env.step(kRight);
    CHECK(env.hidden_state() == s);
  }
}

TEST_CASE("traces are reproducible and well-formed") {
  const Trace a = generate_trace(ObsMode::kFullState,
                                 BoundaryRule::kStayInPlace, 50, 99);
  const Trace b = generate_trace(ObsMode::kFullState,
                                 BoundaryRule::kStayInPlace, 50, 99);
  REQUIRE(a.length() == 50);
  REQUIRE(a.steps().size() == 50);
  for (int t = 0; t < 50; ++t) {
    CHECK(a.steps()[t].obs == b.steps()[t].obs);
    CHECK(a.steps()[t].action == b.steps()[t].action);
    CHECK(a.hidden_states()[t] >= 1);
    CHECK(a.hidden_states()[t] <= 7);
  }
  CHECK(a.hidden_states()[0] == 4);
}

TEST_CASE("action frequencies are balanced over a long stream") {
  RandomPolicy policy(123);
  int rights = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) rights += policy.sample() == kRight ? 1 : 0;
  const double freq = static_cast<double>(rights) / n;
  CHECK(std::abs(freq - 0.5) < 0.01);
}

TEST_CASE("empirical state distribution matches the stationary one") {
  for (BoundaryRule rule :
       {BoundaryRule::kStayInPlace, BoundaryRule::kReflect}) {
    RandomWalkEnv env(ObsMode::kBitOnly, rule);
    RandomPolicy policy(7);
    env.reset();
    Vec counts = Vec::Zero(kNumStates);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      counts[env.hidden_state() - 1] += 1.0;
      env.step(policy.sample());
    }
    counts /= static_cast<double>(n);
    const Vec pi = stationary_distribution(transition_matrix(rule));
    CHECK(0.5 * (counts - pi).cwiseAbs().sum() < 0.01);  // total variation
  }
}

TEST_CASE("bit-only and full observations share hidden trajectories") {
  const Trace full = generate_trace(ObsMode::kFullState,
                                    BoundaryRule::kStayInPlace, 200, 5);
  const Trace bit = generate_trace(ObsMode::kBitOnly,
                                   BoundaryRule::kStayInPlace, 200, 5);
  CHECK(full.hidden_states() == bit.hidden_states());
  for (int t = 0; t < 200; ++t) {
    CHECK(full.steps()[t].action == bit.steps()[t].action);
    CHECK(full.steps()[t].obs[0] == bit.steps()[t].obs[0]);
  }
}

TEST_CASE("trace csv round-trips") {
  const Trace trace = generate_trace(ObsMode::kFullState,
                                     BoundaryRule::kStayInPlace, 30, 42);
  std::ostringstream out;
  MetaInfo meta;
  meta.set("seed", std::uint64_t{42});
  meta.write(out);
  export_trace_csv(trace, walk_action_labels(), out);

  std::istringstream in(out.str());
  const Trace back = import_trace_csv(in, walk_action_labels());
  REQUIRE(back.length() == trace.length());
  for (int t = 0; t < trace.length(); ++t) {
    CHECK(back.steps()[t].obs == trace.steps()[t].obs);
    CHECK(back.steps()[t].action == trace.steps()[t].action);
    CHECK(back.hidden_states()[t] == trace.hidden_states()[t]);
  }
}
