// Answer networks: feature construction, the linear-sigmoid forward map
// y = sigma(W x), and the gradient of each prediction in its own weight row.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tdnet/qnet.hpp"

namespace tdnet {

enum class Activation { kIdentity, kLogistic };

/// One block of the feature vector, emitted in declaration order.
struct FeaturePart {
  enum class Kind {
    kBias,               // constant 1
    kStateOneHot,        // observation bits [1, 1+width): the state block
    kActionObsPairOneHot,  // one-hot over (previous action, special bit)
    kPrevPredictions,    // previous step's prediction vector
  };

  Kind kind;
  int width;

  friend bool operator==(const FeaturePart&, const FeaturePart&) = default;
};

class FeatureRecipe {
 public:
  FeatureRecipe() = default;
  explicit FeatureRecipe(std::vector<FeaturePart> parts)
      : parts_(std::move(parts)) {
    for (const auto& p : parts_) {
      if (p.width < 1) throw std::invalid_argument("feature part width < 1");
      length_ += p.width;
    }
  }

  /// The state one-hot features used on the fully observed walk.
  static FeatureRecipe state_one_hot(int num_states) {
    return FeatureRecipe({{FeaturePart::Kind::kStateOneHot, num_states}});
  }

  /// Bias + (previous action, observation bit) pair + previous predictions;
  /// the recipe for predictive-state learning on the bit-only walk.
  static FeatureRecipe bias_pair_prev(int num_predictions,
                                      int num_actions = 2) {
    return FeatureRecipe(
        {{FeaturePart::Kind::kBias, 1},
         {FeaturePart::Kind::kActionObsPairOneHot, 2 * num_actions},
         {FeaturePart::Kind::kPrevPredictions, num_predictions}});
  }

  int length() const { return length_; }
  const std::vector<FeaturePart>& parts() const { return parts_; }

  friend bool operator==(const FeatureRecipe&, const FeatureRecipe&) = default;

 private:
  std::vector<FeaturePart> parts_;
  int length_ = 0;
};

/// Assemble the feature vector from the previous action, the current
/// observation, and the previous predictions. Before the first action exists
/// the pair block is all zeros (the null-action convention); y_prev is the
/// zero vector at the start of experience. The _into form reuses the buffer.
inline void build_features_into(Vec& x, const FeatureRecipe& recipe,
                                std::optional<ActionId> a_prev, const Vec& obs,
                                const Vec& y_prev) {
  x.resize(recipe.length());
  x.setZero();
  int at = 0;
  for (const auto& p : recipe.parts()) {
    switch (p.kind) {
      case FeaturePart::Kind::kBias:
        x[at] = 1.0;
        break;
      case FeaturePart::Kind::kStateOneHot:
        if (obs.size() < 1 + p.width)
          throw std::invalid_argument(
              "build_features: observation lacks a state block");
        x.segment(at, p.width) = obs.segment(1, p.width);
        break;
      case FeaturePart::Kind::kActionObsPairOneHot: {
        if (obs.size() < 1)
          throw std::invalid_argument("build_features: empty observation");
        if (a_prev) {
          const int bit = obs[0] != 0.0 ? 1 : 0;
          const int slot = *a_prev * 2 + bit;
          if (slot < 0 || slot >= p.width)
            throw std::invalid_argument("build_features: action out of range");
          x[at + slot] = 1.0;
        }
        break;
      }
      case FeaturePart::Kind::kPrevPredictions:
        if (y_prev.size() != p.width)
          throw std::invalid_argument(
              "build_features: prediction vector length mismatch");
        x.segment(at, p.width) = y_prev;
        break;
    }
    at += p.width;
  }
}

inline Vec build_features(const FeatureRecipe& recipe,
                          std::optional<ActionId> a_prev, const Vec& obs,
                          const Vec& y_prev) {
  Vec x;
  build_features_into(x, recipe, a_prev, obs, y_prev);
  return x;
}

inline double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

/// The learned map producing predictions. Mutable, owned by a single run.
struct AnswerNet {
  Mat W;  // n x m
  Activation activation = Activation::kIdentity;
  FeatureRecipe recipe;

  static AnswerNet zeros(int num_nodes, FeatureRecipe r, Activation act) {
    AnswerNet net;
    net.W = Mat::Zero(num_nodes, r.length());
    net.activation = act;
    net.recipe = std::move(r);
    return net;
  }

  int num_nodes() const { return static_cast<int>(W.rows()); }
  int num_features() const { return static_cast<int>(W.cols()); }
};

inline void forward_into(Vec& y, const AnswerNet& net, const Vec& x) {
  if (x.size() != net.W.cols())
    throw std::invalid_argument("forward: feature length mismatch");
  y.resize(net.W.rows());
  y.noalias() = net.W * x;
  if (net.activation == Activation::kLogistic)
    for (int i = 0; i < y.size(); ++i) y[i] = logistic(y[i]);
}

inline Vec forward(const AnswerNet& net, const Vec& x) {
  Vec y;
  forward_into(y, net, x);
  return y;
}

/// d y_i / d W_i given y = forward(net, x): x itself for the identity
/// activation, y_i (1 - y_i) x for the logistic. Row i of the result is the
/// gradient of prediction i in its own weight row.
inline Mat prediction_gradient(const AnswerNet& net, const Vec& x,
                               const Vec& y) {
  if (x.size() != net.W.cols() || y.size() != net.W.rows())
    throw std::invalid_argument("prediction_gradient: dimension mismatch");
  Mat g(net.W.rows(), net.W.cols());
  for (int i = 0; i < g.rows(); ++i) {
    const double scale = net.activation == Activation::kLogistic
                             ? y[i] * (1.0 - y[i])
                             : 1.0;
    g.row(i) = scale * x.transpose();
  }
  return g;
}

/// Weight snapshot as CSV: node,feature,weight.
inline void export_weights_csv(const AnswerNet& net, std::ostream& out) {
  out << "node,feature,weight\n";
  char buf[64];
  for (int i = 0; i < net.W.rows(); ++i)
    for (int j = 0; j < net.W.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", net.W(i, j));
      out << i << ',' << j << ',' << buf << '\n';
    }
}

}  // namespace tdnet
