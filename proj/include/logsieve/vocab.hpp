#pragma once

// Event-id vocabulary and fixed-length encoding. Indices 0..3 are reserved
// for [PAD], [UNK], [CLS], [MASK]; training templates get 4, 5, ... in order
// of first appearance. The vocabulary is immutable once built; encoding is
// pure and callable concurrently.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "logsieve/grouping.hpp"

namespace logsieve {

using TokenId = int32_t;

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<uint8_t> attn_mask;  // 1 = real token, 0 = pad
  int label = 0;
  std::string seq_id;
};

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kReserved = 4;

  static Vocabulary build(const std::vector<EventSequence>& train_seqs) {
    if (train_seqs.empty()) throw std::invalid_argument("Vocabulary::build: empty training set");
    Vocabulary v;
    for (const auto& seq : train_seqs)
      for (int event : seq.event_ids)
        if (v.template_to_index_.try_emplace(event, v.size()).second)
          v.index_to_template_.push_back(event);
    return v;
  }

  int size() const { return kReserved + static_cast<int>(index_to_template_.size()); }

  TokenId index_of(int template_id) const {
    auto it = template_to_index_.find(template_id);
    return it == template_to_index_.end() ? kUnk : it->second;
  }

  // Template id for a non-reserved index; -1 for UNK and other reserved rows.
  int template_of(TokenId index) const {
    if (index < kReserved || index >= size()) return -1;
    return index_to_template_[index - kReserved];
  }

  static bool is_reserved(TokenId index) { return index < kReserved; }

  uint64_t hash() const {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&h](uint64_t x) {
      for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xff;
        h *= 1099511628211ULL;
      }
    };
    mix(static_cast<uint64_t>(index_to_template_.size()));
    for (int t : index_to_template_) mix(static_cast<uint64_t>(t));
    return h;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Vocabulary::save: cannot open " + path);
    out << "# logsieve-vocab v1\n";
    out << kPad << "\t[PAD]\n" << kUnk << "\t[UNK]\n" << kCls << "\t[CLS]\n" << kMask << "\t[MASK]\n";
    for (size_t i = 0; i < index_to_template_.size(); ++i)
      out << (kReserved + i) << '\t' << index_to_template_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Vocabulary::load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "# logsieve-vocab v1")
      throw std::runtime_error("Vocabulary::load: bad or missing version header in " + path);
    Vocabulary v;
    int expect = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream iss(line);
      std::string idx, tok;
      if (!std::getline(iss, idx, '\t') || !std::getline(iss, tok))
        throw std::runtime_error("Vocabulary::load: malformed row: " + line);
      if (std::stoi(idx) != expect)
        throw std::runtime_error("Vocabulary::load: non-contiguous index " + idx);
      if (expect >= kReserved) {
        int tid = std::stoi(tok);
        v.template_to_index_[tid] = expect;
        v.index_to_template_.push_back(tid);
      }
      ++expect;
    }
    if (expect < kReserved) throw std::runtime_error("Vocabulary::load: missing reserved rows");
    return v;
  }

 private:
  std::vector<int> index_to_template_;
  std::unordered_map<int, TokenId> template_to_index_;
};

// Fixed-length encoding: optional [CLS] prefix, unknown templates become
// [UNK], truncation keeps the earliest events, right-padded with [PAD].
inline TokenSequence encode(const EventSequence& seq, const Vocabulary& vocab, int max_len,
                            bool with_cls) {
  if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");
  TokenSequence out;
  out.label = seq.label;
  out.seq_id = seq.seq_id;
  out.ids.reserve(max_len);
  if (with_cls) out.ids.push_back(Vocabulary::kCls);
  for (int event : seq.event_ids) {
    if (static_cast<int>(out.ids.size()) >= max_len) break;
    out.ids.push_back(vocab.index_of(event));
  }
  out.attn_mask.assign(out.ids.size(), 1);
  out.ids.resize(max_len, Vocabulary::kPad);
  out.attn_mask.resize(max_len, 0);
  return out;
}

// Recovers template ids at non-pad, non-CLS positions; UNK maps to -1.
inline std::vector<int> decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<int> events;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    if (!seq.attn_mask[i]) continue;
    if (seq.ids[i] == Vocabulary::kCls) continue;
    events.push_back(vocab.template_of(seq.ids[i]));
  }
  return events;
}

}  // namespace logsieve
