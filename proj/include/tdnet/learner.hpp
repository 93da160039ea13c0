// The TD-network learning step and the online/batch trainers built on it.
//
// Per step, quantities are produced strictly in the order
//   y_t, a_t, c_t, o_{t+1}, x_{t+1}, y~_{t+1}, z_t, W_{t+1}, y_{t+1}:
// the provisional prediction y~_{t+1} that feeds the target is computed with
// the weights *before* the update, and the gradient is taken at the features
// x_t that produced y_t, so x_t is retained across steps.
#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <utility>

#include "tdnet/anet.hpp"
#include "tdnet/env.hpp"
#include "tdnet/qnet.hpp"

namespace tdnet {

class TdLearner {
 public:
  TdLearner(AnswerNet net, const QuestionNet& q, double alpha)
      : net_(std::move(net)), q_(&q), alpha_(alpha) {
    if (net_.num_nodes() != q.size())
      throw std::invalid_argument("TdLearner: weight rows != question nodes");
    if (alpha_ < 0.0) throw std::invalid_argument("TdLearner: alpha < 0");
  }

  /// Begin experience at the first observation. There is no previous action
  /// or prediction yet: the pair block is zeroed and y_prev is the zero
  /// vector.
  void start(const Vec& first_obs) {
    x_curr_ = build_features(net_.recipe, std::nullopt, first_obs,
                             Vec::Zero(net_.num_nodes()));
    y_curr_ = forward(net_, x_curr_);
  }

  /// One TD-network update from taking action `a` and observing `next_obs`.
  void step(ActionId a, const Vec& next_obs) {
    c_ = conditions(a);
    build_features_into(x_next_, net_.recipe, a, next_obs, y_curr_);
    forward_into(y_tilde_, net_, x_next_);  // old weights
    compute_targets_into(z_, *q_, next_obs, y_tilde_);
    y_before_ = y_curr_;

    if (collect_delta_w) last_delta_w = Mat::Zero(net_.W.rows(), net_.W.cols());
    for (int i = 0; i < net_.num_nodes(); ++i) {
      double coef = alpha_ * (z_[i] - y_curr_[i]) * c_[i];
      if (net_.activation == Activation::kLogistic)
        coef *= y_curr_[i] * (1.0 - y_curr_[i]);
      if (coef != 0.0) {
        net_.W.row(i).noalias() += coef * x_curr_.transpose();
        if (collect_delta_w)
          last_delta_w.row(i) = coef * x_curr_.transpose();
      }
    }

    forward_into(y_curr_, net_, x_next_);  // new weights
    x_curr_.swap(x_next_);
  }

  // Post-step views, valid until the next call to step().
  const Vec& last_y() const { return y_before_; }       // y_t
  const Vec& last_y_tilde() const { return y_tilde_; }  // y~_{t+1}
  const Vec& last_z() const { return z_; }
  const Vec& last_c() const { return c_; }
  const Vec& last_features() const { return x_curr_; }  // x_{t+1}

  const Vec& predictions() const { return y_curr_; }  // y_{t+1}
  const AnswerNet& net() const { return net_; }
  AnswerNet release_net() { return std::move(net_); }

  bool collect_delta_w = false;
  Mat last_delta_w;

 private:
  const Vec& conditions(ActionId a) {
    if (cond_cache_.empty())
      for (int b = 0; b < q_->num_actions(); ++b)
        cond_cache_.push_back(compute_conditions(*q_, b));
    if (a < 0 || a >= static_cast<int>(cond_cache_.size()))
      throw std::invalid_argument("step: unknown action");
    return cond_cache_[a];
  }

  AnswerNet net_;
  const QuestionNet* q_;
  double alpha_;
  Vec x_curr_, y_curr_;
  Vec c_, x_next_, y_tilde_, z_, y_before_;
  std::vector<Vec> cond_cache_;
};

/// Called after every update with the step index (1-based) and the learner;
/// last_y() is the prediction the update corrected, predictions() the new one.
using StepObserver = std::function<void(int t, const TdLearner&)>;

/// Online training along a recorded trace: one td step per recorded action
/// whose following observation is also recorded.
inline AnswerNet train_online(std::span<const TraceStep> steps,
                              const QuestionNet& q, AnswerNet net,
                              double alpha,
                              const StepObserver& observer = {}) {
  if (steps.empty()) return net;
  TdLearner learner(std::move(net), q, alpha);
  learner.start(steps[0].obs);
  for (size_t t = 0; t + 1 < steps.size(); ++t) {
    learner.step(steps[t].action, steps[t + 1].obs);
    if (observer) observer(static_cast<int>(t + 1), learner);
  }
  return learner.release_net();
}

/// Online training along a freshly generated stream of the given length.
inline AnswerNet train_online(RandomWalkEnv& env, RandomPolicy& policy,
                              const QuestionNet& q, AnswerNet net,
                              double alpha, int num_steps,
                              const StepObserver& observer = {}) {
  TdLearner learner(std::move(net), q, alpha);
  learner.start(env.reset());
  for (int t = 1; t <= num_steps; ++t) {
    const ActionId a = policy.sample();
    const Vec next_obs = env.step(a);
    learner.step(a, next_obs);
    if (observer) observer(t, learner);
  }
  return learner.release_net();
}

struct BatchResult {
  AnswerNet net;
  int sweeps = 0;
  bool converged = false;
};

/// Batch updating: accumulate the weight changes of every step of the
/// recorded sequence against the start-of-sweep weights, apply the sum once,
/// and repeat until the largest applied change drops below `tolerance`.
/// Never regenerates data. Non-convergence is flagged, not thrown.
inline BatchResult train_batch(std::span<const TraceStep> steps,
                               const QuestionNet& q, AnswerNet net,
                               double alpha, int max_sweeps,
                               double tolerance) {
  if (steps.size() < 2) return {std::move(net), 0, true};
  std::vector<Vec> cond;
  for (int a = 0; a < q.num_actions(); ++a)
    cond.push_back(compute_conditions(q, a));
  Mat delta(net.W.rows(), net.W.cols());
  Vec x, x2, y, y2, z;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    delta.setZero();
    build_features_into(x, net.recipe, std::nullopt, steps[0].obs,
                        Vec::Zero(net.num_nodes()));
    forward_into(y, net, x);
    for (size_t t = 0; t + 1 < steps.size(); ++t) {
      const Vec& c = cond[steps[t].action];
      build_features_into(x2, net.recipe, steps[t].action, steps[t + 1].obs,
                          y);
      forward_into(y2, net, x2);  // doubles as y~_{t+1}: weights are frozen
      compute_targets_into(z, q, steps[t + 1].obs, y2);
      for (int i = 0; i < net.num_nodes(); ++i) {
        double coef = alpha * (z[i] - y[i]) * c[i];
        if (net.activation == Activation::kLogistic)
          coef *= y[i] * (1.0 - y[i]);
        if (coef != 0.0) delta.row(i).noalias() += coef * x.transpose();
      }
      x.swap(x2);
      y.swap(y2);
    }
    net.W += delta;
    if (!net.W.allFinite()) return {std::move(net), sweep, false};
    if (delta.cwiseAbs().maxCoeff() < tolerance)
      return {std::move(net), sweep, true};
  }
  return {std::move(net), max_sweeps, false};
}

/// Per-step prediction log rows: t,node,y,y_tilde,z,c.
inline StepObserver make_log_writer(std::ostream& out) {
  out << "t,node,y,y_tilde,z,c\n";
  return [&out](int t, const TdLearner& learner) {
    char buf[160];
    for (int i = 0; i < learner.predictions().size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g,%g\n", t, i,
                    learner.last_y()[i], learner.last_y_tilde()[i],
                    learner.last_z()[i], learner.last_c()[i]);
      out << buf;
    }
  };
}

}  // namespace tdnet
