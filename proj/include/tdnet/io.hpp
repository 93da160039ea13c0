// CSV import/export and the metadata header embedded in every artifact.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tdnet/env.hpp"
#include "tdnet/oracle.hpp"

namespace tdnet {

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

/// Key/value lines written as `# key=value` ahead of the CSV header, so
/// every artifact records how it was produced. gnuplot treats them as
/// comments.
struct MetaInfo {
  std::vector<std::pair<std::string, std::string>> entries;

  MetaInfo& set(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
    return *this;
  }
  MetaInfo& set(const std::string& key, std::uint64_t value) {
    return set(key, std::to_string(value));
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : entries) out << "# " << k << '=' << v << '\n';
  }
};

inline std::ofstream open_artifact(const std::filesystem::path& path,
                                   const MetaInfo& meta) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write artifact: " + path.string());
  meta.write(out);
  return out;
}

inline std::string bits_string(const Vec& obs) {
  std::string s;
  s.reserve(obs.size());
  for (int i = 0; i < obs.size(); ++i) s += obs[i] != 0.0 ? '1' : '0';
  return s;
}

/// Trace rows: t,state(hidden),obs_bits,action. Replaying the same file
/// through both learners is what keeps MC/TD comparisons matched.
inline void export_trace_csv(const Trace& trace,
                             const std::vector<std::string>& action_labels,
                             std::ostream& out) {
  out << "t,state,obs_bits,action\n";
  const auto steps = trace.steps();
  for (int t = 0; t < trace.length(); ++t)
    out << (t + 1) << ',' << trace.hidden_states()[t] << ','
        << bits_string(steps[t].obs) << ','
        << action_labels[steps[t].action] << '\n';
}

inline Trace import_trace_csv(std::istream& in,
                              const std::vector<std::string>& action_labels) {
  std::vector<TraceStep> steps;
  std::vector<int> hidden;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::istringstream row(line);
    std::string t_str, state_str, bits, action;
    if (!std::getline(row, t_str, ',') || !std::getline(row, state_str, ',') ||
        !std::getline(row, bits, ',') || !std::getline(row, action, ','))
      throw std::runtime_error("trace: malformed row: " + line);
    Vec obs(static_cast<int>(bits.size()));
    for (size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1')
        throw std::runtime_error("trace: bad obs bits: " + bits);
      obs[static_cast<int>(i)] = bits[i] == '1' ? 1.0 : 0.0;
    }
    ActionId a = -1;
    for (size_t i = 0; i < action_labels.size(); ++i)
      if (action_labels[i] == action) a = static_cast<ActionId>(i);
    if (a < 0) throw std::runtime_error("trace: unknown action: " + action);
    steps.push_back(TraceStep{std::move(obs), a});
    hidden.push_back(std::stoi(state_str));
  }
  return Trace(std::move(steps), std::move(hidden));
}

/// Oracle table rows: state,node_label,true_value.
inline void export_oracle_csv(const OracleTable& table, std::ostream& out) {
  out << "state,node_label,true_value\n";
  for (int s = 1; s <= kNumStates; ++s)
    for (int i = 0; i < table.values.rows(); ++i)
      out << s << ',' << table.node_labels[i] << ','
          << fmt(table.values(i, s - 1), "%.12g") << '\n';
}

}  // namespace tdnet
