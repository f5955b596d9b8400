#pragma once

// Streaming Drain-style log parser. Lines are tokenized with dataset-specific
// variable masking, then routed through a fixed-depth tree keyed first by
// token count and then by leading tokens. Leaves hold candidate templates;
// a line joins the most similar template above the threshold or founds a new
// one. Matching may generalize template positions to the wildcard slot.
//
// The tree is a single mutable state machine: parse one stream per tree.
// After parsing, template lookup is read-only and safe to share.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace logsieve {

inline constexpr const char* kWildcard = "<*>";

struct RawLogLine {
  int64_t line_no = 0;
  std::optional<int64_t> timestamp;
  std::optional<int> label_flag;
  std::string content;
};

struct LogTemplate {
  int template_id = -1;
  std::vector<std::string> tokens;
  int64_t match_count = 0;

  std::string to_string() const {
    std::string s;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i) s += ' ';
      s += tokens[i];
    }
    return s;
  }
};

struct ParsedLog {
  int64_t line_no = 0;
  std::optional<int64_t> timestamp;
  int template_id = -1;
  std::vector<std::string> parameters;
  std::optional<int> label_flag;
};

// Fraction of positions where the template token literally equals the line
// token. Wildcard slots never count toward the numerator.
inline double similarity(const std::vector<std::string>& tokens, const LogTemplate& tmpl) {
  if (tokens.size() != tmpl.tokens.size())
    throw std::invalid_argument("similarity: token count mismatch (caller bug)");
  if (tokens.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tmpl.tokens[i] != kWildcard && tmpl.tokens[i] == tokens[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

struct ParserConfig {
  int depth = 4;                  // tree depth; depth-2 leading-token levels
  double sim_threshold = 0.4;
  int max_children = 100;
  // Masking patterns applied in order before whitespace splitting.
  std::vector<std::string> mask_patterns;

  static ParserConfig with_default_masks() {
    ParserConfig c;
    c.mask_patterns = {
        R"(blk_-?[0-9]+)",                                // HDFS block ids
        R"(/?(\d{1,3}\.){3}\d{1,3}(:\d+)?)",              // IPv4, optional port
        R"(0x[0-9a-fA-F]+)",                              // hex literals
        R"(\b[0-9a-fA-F]{8,}\b)",                         // long hex strings
        R"(-?\b\d+\b)",                                   // integers
    };
    return c;
  }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(std::move(tok));
  return out;
}

inline bool has_digit(const std::string& s) {
  for (char c : s)
    if (c >= '0' && c <= '9') return true;
  return false;
}

}  // namespace detail

class DrainParser {
 public:
  explicit DrainParser(ParserConfig config = ParserConfig::with_default_masks())
      : config_(std::move(config)) {
    if (config_.depth < 3) throw std::invalid_argument("DrainParser: depth must be >= 3");
    for (const auto& p : config_.mask_patterns)
      masks_.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
  }

  // Masks configured variable patterns to the wildcard token, then splits on
  // whitespace. Runs of adjacent wildcards inside one token collapse to one.
  std::vector<std::string> tokenize_content(const std::string& content) const {
    if (content.empty()) throw std::invalid_argument("tokenize_content: empty content");
    std::string masked = content;
    for (const auto& re : masks_) masked = std::regex_replace(masked, re, kWildcard);
    auto tokens = detail::split_ws(masked);
    for (auto& t : tokens) collapse_wildcards(t);
    return tokens;
  }

  ParsedLog parse_line(const RawLogLine& line) {
    auto tokens = tokenize_content(line.content);
    auto original = detail::split_ws(line.content);

    Node* leaf = descend(tokens);
    int best_id = -1;
    double best_sim = -1.0;
    for (int tid : leaf->template_ids) {
      double sim = similarity(tokens, templates_[tid]);
      if (sim > best_sim) {
        best_sim = sim;
        best_id = tid;
      }
      // ties break toward the lowest template id, which is the first seen
    }

    int matched;
    if (best_id >= 0 && best_sim >= config_.sim_threshold) {
      matched = best_id;
      LogTemplate& tmpl = templates_[matched];
      for (size_t i = 0; i < tokens.size(); ++i)
        if (tmpl.tokens[i] != kWildcard && tmpl.tokens[i] != tokens[i])
          tmpl.tokens[i] = kWildcard;
      tmpl.match_count += 1;
    } else {
      matched = static_cast<int>(templates_.size());
      LogTemplate tmpl;
      tmpl.template_id = matched;
      tmpl.tokens = tokens;
      tmpl.match_count = 1;
      templates_.push_back(std::move(tmpl));
      leaf->template_ids.push_back(matched);
    }

    ParsedLog out;
    out.line_no = line.line_no;
    out.timestamp = line.timestamp;
    out.template_id = matched;
    out.label_flag = line.label_flag;
    const LogTemplate& tmpl = templates_[matched];
    const bool aligned = original.size() == tokens.size();
    for (size_t i = 0; i < tmpl.tokens.size(); ++i)
      if (tmpl.tokens[i] == kWildcard)
        out.parameters.push_back(aligned ? original[i] : tokens[i]);
    return out;
  }

  const std::vector<LogTemplate>& templates() const { return templates_; }
  const ParserConfig& config() const { return config_; }

 private:
  struct Node {
    std::map<std::string, std::unique_ptr<Node>> children;
    std::vector<int> template_ids;  // populated at leaves only
  };

  static void collapse_wildcards(std::string& tok) {
    const std::string double_wc = std::string(kWildcard) + kWildcard;
    size_t pos;
    while ((pos = tok.find(double_wc)) != std::string::npos)
      tok.erase(pos, std::char_traits<char>::length(kWildcard));
  }

  Node* descend(const std::vector<std::string>& tokens) {
    Node* node = &length_root_[static_cast<int>(tokens.size())];
    const int token_levels = config_.depth - 2;
    const int levels = std::min<int>(token_levels, static_cast<int>(tokens.size()));
    for (int d = 0; d < levels; ++d) {
      std::string key = tokens[d];
      if (detail::has_digit(key)) key = kWildcard;  // numeric tokens share a branch
      auto it = node->children.find(key);
      if (it == node->children.end()) {
        if (static_cast<int>(node->children.size()) >= config_.max_children)
          key = kWildcard;  // overflow routes through the wildcard branch
        auto& slot = node->children[key];
        if (!slot) slot = std::make_unique<Node>();
        node = slot.get();
      } else {
        node = it->second.get();
      }
    }
    return node;
  }

  ParserConfig config_;
  std::vector<std::regex> masks_;
  std::map<int, Node> length_root_;
  std::vector<LogTemplate> templates_;
};

// --- parse artifacts ---------------------------------------------------------
// One record per line: line_no, timestamp, template_id, params_json, label.
// Missing timestamp or label is written as "-".

inline void write_parse_file(const std::string& path, const std::vector<ParsedLog>& logs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_parse_file: cannot open " + path);
  for (const auto& log : logs) {
    nlohmann::json params = log.parameters;
    out << log.line_no << '\t'
        << (log.timestamp ? std::to_string(*log.timestamp) : "-") << '\t'
        << log.template_id << '\t' << params.dump() << '\t'
        << (log.label_flag ? std::to_string(*log.label_flag) : "-") << '\n';
  }
}

inline std::vector<ParsedLog> read_parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_parse_file: cannot open " + path);
  std::vector<ParsedLog> logs;
  std::string line;
  int64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string line_no, ts, tid, params, label;
    if (!std::getline(iss, line_no, '\t') || !std::getline(iss, ts, '\t') ||
        !std::getline(iss, tid, '\t') || !std::getline(iss, params, '\t') ||
        !std::getline(iss, label, '\t'))
      throw std::runtime_error("read_parse_file: malformed record at line " + std::to_string(n));
    ParsedLog log;
    log.line_no = std::stoll(line_no);
    if (ts != "-") log.timestamp = std::stoll(ts);
    log.template_id = std::stoi(tid);
    for (const auto& p : nlohmann::json::parse(params)) log.parameters.push_back(p.get<std::string>());
    if (label != "-") log.label_flag = std::stoi(label);
    logs.push_back(std::move(log));
  }
  return logs;
}

inline void write_templates_tsv(const std::string& path, const std::vector<LogTemplate>& templates) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_templates_tsv: cannot open " + path);
  for (const auto& t : templates) out << t.template_id << '\t' << t.to_string() << '\n';
}

}  // namespace logsieve
