// JSON load/save for question networks. Schema:
//
//   {
//     "observation_width": 8,
//     "actions": ["L", "R"],
//     "nodes": [
//       {"label": "1-step",
//        "condition": "always" | "action:<label>",
//        "terms": [{"source": "obs:<i>" | "pred:<label-or-index>",
//                   "weight": 1.0}]}
//     ]
//   }
//
// Serialization writes prediction references as indices so round-trips are
// exact even when labels repeat.
#pragma once

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "tdnet/qnet.hpp"

namespace tdnet {

class QnetParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int parse_int(const std::string& text, const std::string& where) {
  try {
    size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw QnetParseError(where + ": expected an integer, got '" + text + "'");
  }
}

}  // namespace detail

inline QuestionNet parse_qnet(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw QnetParseError(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw QnetParseError("top level must be an object");
  if (!doc.contains("observation_width") ||
      !doc["observation_width"].is_number_integer())
    throw QnetParseError("missing integer field 'observation_width'");
  if (!doc.contains("actions") || !doc["actions"].is_array())
    throw QnetParseError("missing array field 'actions'");
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw QnetParseError("missing array field 'nodes'");

  const int width = doc["observation_width"].get<int>();
  std::vector<std::string> actions;
  for (const auto& a : doc["actions"]) {
    if (!a.is_string()) throw QnetParseError("actions: labels must be strings");
    actions.push_back(a.get<std::string>());
  }

  // first pass: labels, so pred:<label> can reference forward nodes
  std::vector<std::string> labels;
  for (const auto& j : doc["nodes"])
    labels.push_back(j.is_object() && j.contains("label") && j["label"].is_string()
                         ? j["label"].get<std::string>()
                         : "");

  std::vector<NodeSpec> nodes;
  int idx = 0;
  for (const auto& j : doc["nodes"]) {
    const std::string where = "node " + std::to_string(idx);
    if (!j.is_object()) throw QnetParseError(where + ": must be an object");
    NodeSpec node;
    node.label = labels[idx];

    const std::string cond =
        j.contains("condition") ? j["condition"].get<std::string>() : "always";
    if (cond == "always") {
      node.condition = Condition::always();
    } else if (cond.rfind("action:", 0) == 0) {
      const std::string label = cond.substr(7);
      auto it = std::find(actions.begin(), actions.end(), label);
      if (it == actions.end())
        throw QnetParseError(where + ": condition: unknown action label '" +
                             label + "'");
      node.condition =
          Condition::action_is(static_cast<ActionId>(it - actions.begin()));
    } else {
      throw QnetParseError(where + ": condition: expected 'always' or "
                           "'action:<label>', got '" + cond + "'");
    }

    if (!j.contains("terms") || !j["terms"].is_array())
      throw QnetParseError(where + ": missing array field 'terms'");
    for (const auto& t : j["terms"]) {
      if (!t.is_object() || !t.contains("source") || !t["source"].is_string())
        throw QnetParseError(where + ": terms: missing string field 'source'");
      TargetTerm term;
      const std::string src = t["source"].get<std::string>();
      if (src.rfind("obs:", 0) == 0) {
        term.source = TargetTerm::Source::kObservationBit;
        term.index = detail::parse_int(src.substr(4), where + ": source");
        if (term.index < 0 || term.index >= width)
          throw QnetParseError(where + ": observation index out of range");
      } else if (src.rfind("pred:", 0) == 0) {
        term.source = TargetTerm::Source::kNextPrediction;
        const std::string ref = src.substr(5);
        if (ref.empty())
          throw QnetParseError(where + ": source: empty prediction reference");
        auto it = std::find(labels.begin(), labels.end(), ref);
        term.index = it != labels.end()
                         ? static_cast<int>(it - labels.begin())
                         : detail::parse_int(ref, where + ": source");
        if (term.index < 0 || term.index >= static_cast<int>(labels.size()))
          throw QnetParseError(where + ": prediction index out of range");
      } else {
        throw QnetParseError(where + ": source: expected 'obs:<i>' or "
                             "'pred:<label-or-index>', got '" + src + "'");
      }
      if (!t.contains("weight") || !t["weight"].is_number())
        throw QnetParseError(where + ": terms: missing numeric field 'weight'");
      term.weight = t["weight"].get<double>();
      node.terms.push_back(term);
    }
    nodes.push_back(std::move(node));
    ++idx;
  }

  try {
    return QuestionNet(width, std::move(actions), std::move(nodes));
  } catch (const std::invalid_argument& e) {
    throw QnetParseError(e.what());
  }
}

inline std::string serialize_qnet(const QuestionNet& q) {
  nlohmann::json doc;
  doc["observation_width"] = q.observation_width();
  doc["actions"] = q.action_labels();
  doc["nodes"] = nlohmann::json::array();
  for (int i = 0; i < q.size(); ++i) {
    const NodeSpec& node = q.node(i);
    nlohmann::json j;
    j["label"] = node.label;
    j["condition"] =
        node.condition.kind == Condition::Kind::kAlways
            ? "always"
            : "action:" + q.action_labels()[node.condition.action];
    j["terms"] = nlohmann::json::array();
    for (const auto& t : node.terms) {
      nlohmann::json jt;
      jt["source"] = t.source == TargetTerm::Source::kObservationBit
                         ? "obs:" + std::to_string(t.index)
                         : "pred:" + std::to_string(t.index);
      jt["weight"] = t.weight;
      j["terms"].push_back(jt);
    }
    doc["nodes"].push_back(j);
  }
  return doc.dump(2) + "\n";
}

inline QuestionNet load_qnet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw QnetParseError("cannot open question network file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_qnet(buf.str());
}

inline void save_qnet(const QuestionNet& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << serialize_qnet(q);
}

}  // namespace tdnet
