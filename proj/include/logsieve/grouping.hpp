#pragma once

// Assembles parsed logs into labeled event-id sequences, either keyed by a
// session identifier (HDFS block ids) or by sliding time windows. Also the
// chronological train/val/test split. These are pure functions over a
// materialized log list.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "logsieve/drain.hpp"

namespace logsieve {

enum class WindowMode { session, sliding, fixed };

struct WindowSpec {
  WindowMode mode = WindowMode::session;
  std::string identifier_pattern;   // session mode
  int64_t window_seconds = 300;     // sliding/fixed
  int64_t step_seconds = 60;        // sliding

  void validate() const {
    if (mode == WindowMode::session) {
      if (identifier_pattern.empty())
        throw std::invalid_argument("WindowSpec: session mode requires identifier_pattern");
    } else {
      if (window_seconds <= 0 || step_seconds <= 0)
        throw std::invalid_argument("WindowSpec: window and step must be positive");
      if (step_seconds > window_seconds)
        throw std::invalid_argument("WindowSpec: step must not exceed window");
    }
  }
};

struct EventSequence {
  std::string seq_id;
  std::vector<int> event_ids;
  int label = 0;
  int64_t first_timestamp = 0;
};

struct SessionGrouping {
  std::vector<EventSequence> sequences;
  std::vector<int64_t> rejected_line_nos;  // no identifier match; reported, not dropped silently
};

// One sequence per distinct identifier, ordered by first occurrence. A log
// joins the sequence of its first identifier match. Labels come from the
// key->label map, or from any member line flagged abnormal.
inline SessionGrouping group_session(const std::vector<ParsedLog>& logs, const WindowSpec& spec,
                                     const std::unordered_map<std::string, int>& labels,
                                     const std::vector<std::string>* contents = nullptr) {
  spec.validate();
  if (spec.mode != WindowMode::session)
    throw std::invalid_argument("group_session: spec mode is not session");
  std::regex id_re(spec.identifier_pattern);

  SessionGrouping out;
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < logs.size(); ++i) {
    const ParsedLog& log = logs[i];
    std::smatch m;
    std::string key;
    for (const auto& p : log.parameters) {
      if (std::regex_search(p, m, id_re)) {
        key = m.str();
        break;
      }
    }
    if (key.empty() && contents && i < contents->size() &&
        std::regex_search((*contents)[i], m, id_re))
      key = m.str();
    if (key.empty()) {
      out.rejected_line_nos.push_back(log.line_no);
      continue;
    }
    auto [it, fresh] = index.try_emplace(key, out.sequences.size());
    if (fresh) {
      EventSequence seq;
      seq.seq_id = key;
      seq.first_timestamp = log.timestamp.value_or(log.line_no);
      out.sequences.push_back(std::move(seq));
    }
    EventSequence& seq = out.sequences[it->second];
    seq.event_ids.push_back(log.template_id);
    if (log.label_flag.value_or(0) != 0) seq.label = 1;
  }
  for (auto& seq : out.sequences) {
    auto it = labels.find(seq.seq_id);
    if (it != labels.end() && it->second != 0) seq.label = 1;
  }
  return out;
}

// Half-open windows [t0 + k*step, t0 + k*step + window). Window starts run
// until the data span is covered; empty windows are skipped. A window is
// abnormal iff any member line is flagged abnormal.
inline std::vector<EventSequence> group_sliding(const std::vector<ParsedLog>& logs,
                                                const WindowSpec& spec) {
  WindowSpec eff = spec;
  if (eff.mode == WindowMode::fixed) eff.step_seconds = eff.window_seconds;
  eff.validate();
  if (eff.mode == WindowMode::session)
    throw std::invalid_argument("group_sliding: spec mode is session");
  if (logs.empty()) return {};

  int64_t prev = INT64_MIN;
  for (const auto& log : logs) {
    if (!log.timestamp)
      throw std::runtime_error("group_sliding: missing timestamp at line " +
                               std::to_string(log.line_no));
    if (*log.timestamp < prev)
      throw std::runtime_error("group_sliding: timestamps decrease at line " +
                               std::to_string(log.line_no));
    prev = *log.timestamp;
  }

  const int64_t t0 = *logs.front().timestamp;
  const int64_t span = *logs.back().timestamp - t0 + 1;
  const int64_t w = eff.window_seconds, s = eff.step_seconds;
  const int64_t k_max = span <= w ? 0 : (span - w + s - 1) / s;

  std::vector<EventSequence> out;
  size_t lo = 0;  // first log with timestamp >= start
  for (int64_t k = 0; k <= k_max; ++k) {
    const int64_t start = t0 + k * s;
    while (lo < logs.size() && *logs[lo].timestamp < start) ++lo;
    EventSequence seq;
    seq.seq_id = std::to_string(start);
    seq.first_timestamp = start;
    for (size_t i = lo; i < logs.size() && *logs[i].timestamp < start + w; ++i) {
      seq.event_ids.push_back(logs[i].template_id);
      if (logs[i].label_flag.value_or(0) != 0) seq.label = 1;
    }
    if (!seq.event_ids.empty()) out.push_back(std::move(seq));
  }
  return out;
}

struct SplitResult {
  std::vector<EventSequence> train;
  std::vector<EventSequence> val;
  std::vector<EventSequence> test;
  bool no_abnormal_warning = false;
};

// First train_count normal sequences become train+val (the trailing
// val_fraction of them as val); everything else, abnormal sequences included,
// goes to test. Order stays nondecreasing in first_timestamp throughout.
inline SplitResult chronological_split(std::vector<EventSequence> seqs, int64_t train_count,
                                       double val_fraction) {
  if (train_count <= 0) throw std::invalid_argument("chronological_split: train_count must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("chronological_split: val_fraction must be in [0,1)");
  std::stable_sort(seqs.begin(), seqs.end(),
                   [](const EventSequence& a, const EventSequence& b) {
                     return a.first_timestamp < b.first_timestamp;
                   });
  int64_t normals = 0;
  for (const auto& s : seqs) normals += (s.label == 0);
  if (normals < train_count)
    throw std::runtime_error("chronological_split: only " + std::to_string(normals) +
                             " normal sequences, need " + std::to_string(train_count));

  SplitResult out;
  const int64_t val_count = static_cast<int64_t>(train_count * val_fraction);
  const int64_t pure_train = train_count - val_count;
  int64_t taken = 0;
  for (auto& s : seqs) {
    if (s.label == 0 && taken < train_count) {
      (taken < pure_train ? out.train : out.val).push_back(std::move(s));
      ++taken;
    } else {
      out.test.push_back(std::move(s));
    }
  }
  bool any_abnormal = false;
  for (const auto& s : out.test) any_abnormal |= (s.label != 0);
  out.no_abnormal_warning = !any_abnormal;
  return out;
}

// --- sequence file: seq_id <TAB> label <TAB> space-separated event ids -------

inline void write_sequence_file(const std::string& path, const std::vector<EventSequence>& seqs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sequence_file: cannot open " + path);
  for (const auto& s : seqs) {
    out << s.seq_id << '\t' << s.label << '\t';
    for (size_t i = 0; i < s.event_ids.size(); ++i) {
      if (i) out << ' ';
      out << s.event_ids[i];
    }
    out << '\n';
  }
}

inline std::vector<EventSequence> read_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sequence_file: cannot open " + path);
  std::vector<EventSequence> seqs;
  std::string line;
  int64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream iss(line);
    EventSequence s;
    std::string label, events;
    if (!std::getline(iss, s.seq_id, '\t') || !std::getline(iss, label, '\t') ||
        !std::getline(iss, events))
      throw std::runtime_error("read_sequence_file: malformed record at line " + std::to_string(n));
    s.label = std::stoi(label);
    std::istringstream ev(events);
    int id;
    while (ev >> id) s.event_ids.push_back(id);
    if (s.event_ids.empty())
      throw std::runtime_error("read_sequence_file: empty sequence at line " + std::to_string(n));
    s.first_timestamp = n - 1;  // file order stands in for time
    seqs.push_back(std::move(s));
  }
  return seqs;
}

}  // namespace logsieve
