#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "tdnet/env.hpp"
#include "tdnet/oracle.hpp"

using namespace tdnet;

TEST_CASE("one-step truths by symmetry") {
  CHECK(true_unconditional(BoundaryRule::kStayInPlace, 1, 2) == 0.5);
  CHECK(true_unconditional(BoundaryRule::kStayInPlace, 1, 4) == 0.0);
}

TEST_CASE("five steps from the center, stay-in-place") {
  // frozen from enumerating all 32 action sequences by hand
  CHECK_THAT(true_unconditional(BoundaryRule::kStayInPlace, 5, 4),
             Catch::Matchers::WithinAbs(0.3125, 1e-15));
}

TEST_CASE("matrix power agrees with exhaustive enumeration") {
  for (BoundaryRule rule :
       {BoundaryRule::kStayInPlace, BoundaryRule::kReflect})
    for (int h = 1; h <= 10; ++h)
      for (int s = 1; s <= 7; ++s)
        REQUIRE_THAT(true_unconditional(rule, h, s),
                     Catch::Matchers::WithinAbs(
                         true_unconditional_enumerated(rule, h, s), 1e-12));
}

TEST_CASE("conditional truths follow the deterministic walk") {
  const ActionId rrr[] = {kRight, kRight, kRight};
  CHECK(true_conditional(BoundaryRule::kStayInPlace, rrr, 4) == 1);
  const ActionId rl[] = {kRight, kLeft};
  CHECK(true_conditional(BoundaryRule::kStayInPlace, rl, 4) == 0);
}

TEST_CASE("conditional oracle matches an environment replay") {
  // second implementation: drive the action sequence through the env itself
  for (BoundaryRule rule :
       {BoundaryRule::kStayInPlace, BoundaryRule::kReflect}) {
    const auto seqs = action_sequences(2, 4);
    REQUIRE(seqs.size() == 30);
    for (int s = 1; s <= 7; ++s)
      for (const auto& seq : seqs) {
        RandomWalkEnv env(ObsMode::kBitOnly, rule);
        env.reset();
        while (env.hidden_state() != s)
          env.step(env.hidden_state() < s ? kRight : kLeft);
        Vec obs;
        for (ActionId a : seq) obs = env.step(a);
        REQUIRE(true_conditional(rule, seq, s) ==
                (obs[0] != 0.0 ? 1 : 0));
      }
  }
}

TEST_CASE("fixed point reproduces the chain oracle") {
  const QuestionNet q = build_chain(25, 8);
  const FixedPointResult r =
      extensive_fixed_point(q, ObsMode::kFullState,
                            BoundaryRule::kStayInPlace);
  REQUIRE(r.converged);
  for (int h = 1; h <= 25; ++h)
    for (int s = 1; s <= 7; ++s)
      REQUIRE_THAT(r.table.values(h - 1, s - 1),
                   Catch::Matchers::WithinAbs(
                       true_unconditional(BoundaryRule::kStayInPlace, h, s),
                       1e-10));
}

TEST_CASE("fixed point reproduces the tree oracle") {
  for (int depth = 1; depth <= 4; ++depth) {
    const QuestionNet q = build_action_tree({"L", "R"}, depth, 1);
    const FixedPointResult r = extensive_fixed_point(
        q, ObsMode::kBitOnly, BoundaryRule::kStayInPlace);
    REQUIRE(r.converged);
    const auto seqs = action_sequences(2, depth);
    for (size_t i = 0; i < seqs.size(); ++i)
      for (int s = 1; s <= 7; ++s)
        REQUIRE_THAT(
            r.table.values(i, s - 1),
            Catch::Matchers::WithinAbs(
                true_conditional(BoundaryRule::kStayInPlace, seqs[i], s),
                1e-10));
  }
}

TEST_CASE("discounted self-referential node solves its linear equation") {
  // one node, gamma = 0.9: v(s) = mean over actions of
  //   0.1 * bit(s') + 0.9 * v(s'). Solved directly as (I - 0.9 P) v = 0.1 P b.
  NodeSpec node;
  node.label = "discounted";
  node.terms = {TargetTerm::obs(0, 0.1), TargetTerm::pred(0, 0.9)};
  const QuestionNet q(1, {"L", "R"}, {node});
  const FixedPointResult r =
      extensive_fixed_point(q, ObsMode::kBitOnly, BoundaryRule::kStayInPlace);
  REQUIRE(r.converged);

  const Mat P = transition_matrix(BoundaryRule::kStayInPlace);
  Vec b(kNumStates);
  for (int s = 1; s <= 7; ++s) b[s - 1] = special_bit(s);
  const Mat A = Mat::Identity(7, 7) - 0.9 * P;
  const Vec v = A.colPivHouseholderQr().solve(0.1 * P * b);
  for (int s = 1; s <= 7; ++s)
    REQUIRE_THAT(r.table.values(0, s - 1),
                 Catch::Matchers::WithinAbs(v[s - 1], 1e-9));
}

TEST_CASE("all oracle values live in the unit interval") {
  const QuestionNet q = build_action_tree({"L", "R"}, 3, 1);
  const FixedPointResult r =
      extensive_fixed_point(q, ObsMode::kBitOnly, BoundaryRule::kStayInPlace);
  for (int i = 0; i < r.table.values.rows(); ++i)
    for (int s = 0; s < 7; ++s) {
      REQUIRE(r.table.values(i, s) >= 0.0);
      REQUIRE(r.table.values(i, s) <= 1.0);
      // conditional questions have binary answers on a deterministic walk
      REQUIRE((r.table.values(i, s) < 1e-10 ||
               r.table.values(i, s) > 1.0 - 1e-10));
    }
}

TEST_CASE("an expanding target is flagged as non-contracting") {
  NodeSpec node;
  node.label = "expanding";
  node.terms = {TargetTerm::obs(0, 1.0), TargetTerm::pred(0, 1.0)};
  const QuestionNet q(1, {"L", "R"}, {node});
  const FixedPointResult r = extensive_fixed_point(
      q, ObsMode::kBitOnly, BoundaryRule::kStayInPlace, 1e-12, 1000);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1000);
}

TEST_CASE("rmse basics") {
  Mat truth(1, 7);
  truth << 1, 0, 1, 0, 1, 0, 1;
  CHECK(rmse(truth, truth, uniform_state_weights()) == 0.0);
  const Mat half = Mat::Constant(1, 7, 0.5);
  CHECK_THAT(rmse(half, truth, uniform_state_weights()),
             Catch::Matchers::WithinAbs(0.5, 1e-15));

  // visitation weighting concentrates the error where the mass is
  Vec w = Vec::Zero(7);
  w[0] = 1.0;
  Mat pred = truth;
  pred(0, 0) = 0.0;  // wrong only at state 1
  CHECK_THAT(rmse(pred, truth, w), Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(rmse(pred, truth, uniform_state_weights()),
             Catch::Matchers::WithinAbs(std::sqrt(1.0 / 7.0), 1e-15));
}

TEST_CASE("incorrect proportion counts rounded mismatches") {
  Mat truth(2, 7);
  truth.row(0).setZero();
  truth.row(1).setOnes();
  CHECK(incorrect_proportion(truth, truth) == 0.0);
  const Mat zeros = Mat::Zero(2, 7);
  CHECK_THAT(incorrect_proportion(zeros, truth),
             Catch::Matchers::WithinAbs(50.0, 1e-12));
  Mat non_binary = truth;
  non_binary(0, 0) = 0.25;
  CHECK_THROWS_AS(incorrect_proportion(truth, non_binary),
                  std::invalid_argument);
}

TEST_CASE("stationary distribution of the stay-in-place walk is uniform") {
  const Vec pi =
      stationary_distribution(transition_matrix(BoundaryRule::kStayInPlace));
  for (int s = 0; s < 7; ++s)
    CHECK_THAT(pi[s], Catch::Matchers::WithinAbs(1.0 / 7.0, 1e-12));
}

TEST_CASE("visitation weights count hidden states") {
  const Trace trace = generate_trace(ObsMode::kFullState,
                                     BoundaryRule::kStayInPlace, 1000, 21);
  const Vec w = visitation_weights(trace);
  CHECK_THAT(w.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(w[3] > 0.0);  // the center is always visited
}
