// Question networks: the target/condition structure that defines what each
// prediction node asks of the data one step later.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tdnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Index into the action set declared by the owning network / environment.
using ActionId = int;

/// One additive term of a node's TD target: a weighted read of either a
/// next-step observation bit or a next-step prediction.
struct TargetTerm {
  enum class Source { kObservationBit, kNextPrediction };

  Source source = Source::kObservationBit;
  int index = 0;
  double weight = 1.0;

  static TargetTerm obs(int bit, double w = 1.0) {
    return {Source::kObservationBit, bit, w};
  }
  static TargetTerm pred(int node, double w = 1.0) {
    return {Source::kNextPrediction, node, w};
  }

  friend bool operator==(const TargetTerm&, const TargetTerm&) = default;
};

/// Gate deciding how responsible a node is for matching its target on a
/// given step. Only the two forms used on the random walk are supported:
/// unconditional, or "the action taken this step is a".
struct Condition {
  enum class Kind { kAlways, kActionIs };

  Kind kind = Kind::kAlways;
  ActionId action = 0;  // meaningful only for kActionIs

  static Condition always() { return {Kind::kAlways, 0}; }
  static Condition action_is(ActionId a) { return {Kind::kActionIs, a}; }

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct NodeSpec {
  std::string label;
  std::vector<TargetTerm> terms;
  Condition condition = Condition::always();

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

/// True when the node's target is a convex combination of its sources, so
/// inputs in [0,1] always produce a target in [0,1].
inline bool is_probability_node(const NodeSpec& node) {
  double sum = 0.0;
  for (const auto& t : node.terms) {
    if (t.weight < 0.0) return false;
    sum += t.weight;
  }
  return std::abs(sum - 1.0) <= 1e-12;
}

/// An immutable set of prediction nodes. Validates all index references on
/// construction; safe to share read-only between concurrent runs.
class QuestionNet {
 public:
  QuestionNet(int observation_width, std::vector<std::string> action_labels,
              std::vector<NodeSpec> nodes)
      : observation_width_(observation_width),
        action_labels_(std::move(action_labels)),
        nodes_(std::move(nodes)) {
    if (observation_width_ < 1)
      throw std::invalid_argument("observation width must be positive");
    if (action_labels_.empty())
      throw std::invalid_argument("action set must be nonempty");
    const int n = static_cast<int>(nodes_.size());
    for (int i = 0; i < n; ++i) {
      const NodeSpec& node = nodes_[i];
      for (const auto& t : node.terms) {
        if (t.source == TargetTerm::Source::kObservationBit) {
          if (t.index < 0 || t.index >= observation_width_)
            throw std::invalid_argument("node " + std::to_string(i) +
                                        ": observation index out of range");
        } else {
          if (t.index < 0 || t.index >= n)
            throw std::invalid_argument("node " + std::to_string(i) +
                                        ": prediction index out of range");
        }
      }
      if (node.condition.kind == Condition::Kind::kActionIs &&
          (node.condition.action < 0 ||
           node.condition.action >= static_cast<int>(action_labels_.size())))
        throw std::invalid_argument("node " + std::to_string(i) +
                                    ": condition action out of range");
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  int observation_width() const { return observation_width_; }
  const std::vector<std::string>& action_labels() const {
    return action_labels_;
  }
  int num_actions() const { return static_cast<int>(action_labels_.size()); }
  const NodeSpec& node(int i) const { return nodes_.at(i); }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }

  /// Index of the node carrying `label`, or -1.
  int find_label(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (nodes_[i].label == label) return i;
    return -1;
  }

  friend bool operator==(const QuestionNet& a, const QuestionNet& b) {
    return a.observation_width_ == b.observation_width_ &&
           a.action_labels_ == b.action_labels_ && a.nodes_ == b.nodes_;
  }

 private:
  int observation_width_;
  std::vector<std::string> action_labels_;
  std::vector<NodeSpec> nodes_;
};

/// TD targets z given the next observation and the next predictions.
/// The _into form writes into an existing buffer and never allocates.
inline void compute_targets_into(Vec& z, const QuestionNet& q,
                                 const Vec& o_next, const Vec& y_tilde_next) {
  if (o_next.size() != q.observation_width())
    throw std::invalid_argument("compute_targets: observation width mismatch");
  if (y_tilde_next.size() != q.size())
    throw std::invalid_argument("compute_targets: prediction size mismatch");
  z.resize(q.size());
  for (int i = 0; i < q.size(); ++i) {
    double v = 0.0;
    for (const auto& t : q.node(i).terms)
      v += t.weight * (t.source == TargetTerm::Source::kObservationBit
                           ? o_next[t.index]
                           : y_tilde_next[t.index]);
    z[i] = v;
  }
}

inline Vec compute_targets(const QuestionNet& q, const Vec& o_next,
                           const Vec& y_tilde_next) {
  Vec z;
  compute_targets_into(z, q, o_next, y_tilde_next);
  return z;
}

/// Condition vector c for the action taken this step. Always in {0,1}^n for
/// the two condition kinds supported.
inline Vec compute_conditions(const QuestionNet& q, ActionId a) {
  if (a < 0 || a >= q.num_actions())
    throw std::invalid_argument("compute_conditions: unknown action");
  Vec c(q.size());
  for (int i = 0; i < q.size(); ++i) {
    const Condition& cond = q.node(i).condition;
    c[i] = cond.kind == Condition::Kind::kAlways ? 1.0
           : cond.action == a                    ? 1.0
                                                 : 0.0;
  }
  return c;
}

/// A single chain: node 0 predicts the special observation bit one step
/// ahead, node k predicts node k-1 one step ahead. All nodes unconditional,
/// so node k predicts the bit k+1 steps ahead.
inline QuestionNet build_chain(
    int depth, int observation_width = 1,
    std::vector<std::string> action_labels = {"L", "R"}) {
  if (depth < 1) throw std::invalid_argument("build_chain: depth must be >= 1");
  std::vector<NodeSpec> nodes;
  nodes.reserve(depth);
  for (int k = 0; k < depth; ++k) {
    NodeSpec node;
    node.label = std::to_string(k + 1) + "-step";
    node.terms = {k == 0 ? TargetTerm::obs(0) : TargetTerm::pred(k - 1)};
    nodes.push_back(std::move(node));
  }
  return QuestionNet(observation_width, std::move(action_labels),
                     std::move(nodes));
}

/// All nonempty action sequences up to `depth`, breadth-first by length,
/// actions in declared order within a length. This ordering is shared by the
/// tree builder, the Monte Carlo learner, and the oracles.
inline std::vector<std::vector<ActionId>> action_sequences(int num_actions,
                                                           int depth) {
  std::vector<std::vector<ActionId>> seqs;
  for (int len = 1; len <= depth; ++len) {
    long count = 1;
    for (int i = 0; i < len; ++i) count *= num_actions;
    for (long code = 0; code < count; ++code) {
      std::vector<ActionId> seq(len);
      long rem = code;
      for (int pos = len - 1; pos >= 0; --pos) {
        seq[pos] = static_cast<ActionId>(rem % num_actions);
        rem /= num_actions;
      }
      seqs.push_back(std::move(seq));
    }
  }
  return seqs;
}

/// Node index of a sequence under the ordering of action_sequences().
inline int action_tree_index(int num_actions,
                             std::span<const ActionId> sequence) {
  // all shorter sequences come first: sum of num_actions^d for d < |seq|
  int shorter = 0;
  long pw = 1;
  for (size_t d = 1; d < sequence.size(); ++d) {
    pw *= num_actions;
    shorter += static_cast<int>(pw);
  }
  long code = 0;
  for (ActionId a : sequence) code = code * num_actions + a;
  return shorter + static_cast<int>(code);
}

inline std::string sequence_label(const std::vector<std::string>& labels,
                                  std::span<const ActionId> seq) {
  bool single_char = true;
  for (const auto& l : labels) single_char = single_char && l.size() == 1;
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i > 0 && !single_char) out += '.';
    out += labels[seq[i]];
  }
  return out;
}

/// Fully action-conditional tree: one node per nonempty action sequence of
/// length <= depth. The node for (a1,...,ak) is gated on a1 and targets the
/// node for (a2,...,ak), bottoming out at the special observation bit.
inline QuestionNet build_action_tree(std::vector<std::string> action_labels,
                                     int depth, int observation_width = 1) {
  if (action_labels.empty())
    throw std::invalid_argument("build_action_tree: empty action set");
  if (depth < 1)
    throw std::invalid_argument("build_action_tree: depth must be >= 1");
  const int num_actions = static_cast<int>(action_labels.size());
  std::vector<NodeSpec> nodes;
  for (const auto& seq : action_sequences(num_actions, depth)) {
    NodeSpec node;
    node.label = sequence_label(action_labels, seq);
    node.condition = Condition::action_is(seq[0]);
    if (seq.size() == 1) {
      node.terms = {TargetTerm::obs(0)};
    } else {
      std::span<const ActionId> suffix(seq.data() + 1, seq.size() - 1);
      node.terms = {TargetTerm::pred(action_tree_index(num_actions, suffix))};
    }
    nodes.push_back(std::move(node));
  }
  return QuestionNet(observation_width, std::move(action_labels),
                     std::move(nodes));
}

/// Node indices whose defining action sequence has the given length
/// (chains: length h lives at index h-1; trees: the BFS block for depth d).
inline std::vector<int> tree_depth_group(int num_actions, int depth_of_group) {
  int begin = 0;
  long pw = 1;
  for (int d = 1; d < depth_of_group; ++d) {
    pw *= num_actions;
    begin += static_cast<int>(pw);
  }
  pw *= num_actions;
  std::vector<int> out;
  for (int i = 0; i < pw; ++i) out.push_back(begin + i);
  return out;
}

}  // namespace tdnet
