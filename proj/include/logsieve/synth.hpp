#pragma once

// Deterministic synthetic workload: a Markov grammar over template ids for
// normal sessions, plus injectors that corrupt a chosen fraction of sequences
// into labeled anomalies. Emits the same EventSequence records the grouper
// produces, so downstream stages cannot tell the data origin.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "logsieve/grouping.hpp"
#include "logsieve/rng.hpp"

namespace logsieve {

struct GrammarSpec {
  int n_templates = 20;
  int min_len = 6;
  int max_len = 14;
  uint64_t seed = 1;
  std::vector<double> initial;                    // start distribution
  std::vector<std::vector<double>> transitions;   // row-stochastic

  void validate() const {
    if (n_templates < 2) throw std::invalid_argument("GrammarSpec: need >= 2 templates");
    if (min_len < 2 || max_len < min_len)
      throw std::invalid_argument("GrammarSpec: session lengths must satisfy 2 <= min <= max");
    if (static_cast<int>(initial.size()) != n_templates ||
        static_cast<int>(transitions.size()) != n_templates)
      throw std::invalid_argument("GrammarSpec: table sizes disagree with n_templates");
    for (const auto& row : transitions) {
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw std::invalid_argument("GrammarSpec: negative transition weight");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("GrammarSpec: transition row does not sum to 1");
    }
  }
};

// One dominant cyclic path through the templates plus a couple of lower
// probability branch targets per state. Low-entropy on purpose: sessions are
// highly regular, so corruptions stand out.
inline GrammarSpec default_grammar(int n_templates = 20, uint64_t seed = 1) {
  GrammarSpec g;
  g.n_templates = n_templates;
  g.seed = seed;
  g.initial.assign(n_templates, 0.0);
  g.initial[0] = 0.8;
  g.initial[1 % n_templates] = 0.2;
  g.transitions.assign(n_templates, std::vector<double>(n_templates, 0.0));
  for (int i = 0; i < n_templates; ++i) {
    int next = (i + 1) % n_templates;
    int branch1 = (i + 3) % n_templates;
    int branch2 = (i * 7 + 5) % n_templates;
    if (branch2 == next || branch2 == branch1) branch2 = (branch2 + 1) % n_templates;
    g.transitions[i][next] += 0.80;
    g.transitions[i][branch1] += 0.12;
    g.transitions[i][branch2] += 0.08;
  }
  return g;
}

// Normal sessions, label 0, deterministic in (spec.seed, start_index).
// Each sequence draws from its own substream, so generation order is free.
inline std::vector<EventSequence> gen_normal(const GrammarSpec& spec, int64_t count,
                                             int64_t start_index = 0) {
  spec.validate();
  std::vector<EventSequence> out;
  out.reserve(count);
  for (int64_t i = 0; i < count; ++i) {
    const int64_t ordinal = start_index + i;
    Rng rng = Rng::substream(spec.seed, 0x5e55u, static_cast<uint64_t>(ordinal));
    const int len = spec.min_len + rng.uniform_int(spec.max_len - spec.min_len + 1);
    EventSequence seq;
    seq.seq_id = "s" + std::to_string(ordinal);
    seq.first_timestamp = ordinal;
    seq.event_ids.reserve(len);
    int state = rng.categorical(spec.initial);
    seq.event_ids.push_back(state);
    for (int j = 1; j < len; ++j) {
      state = rng.categorical(spec.transitions[state]);
      seq.event_ids.push_back(state);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

enum class InjectMode { foreign_token, shuffle, rare_transition };

struct AnomalyInjector {
  InjectMode mode = InjectMode::foreign_token;
  double intensity = 0.3;  // fraction of positions touched where applicable

  void validate() const {
    if (intensity <= 0.0 || intensity > 1.0)
      throw std::invalid_argument("AnomalyInjector: intensity must be in (0,1]");
  }
};

namespace detail {

inline void inject_one(EventSequence& seq, const GrammarSpec& grammar,
                       const AnomalyInjector& inj, Rng& rng) {
  const int len = static_cast<int>(seq.event_ids.size());
  const auto original = seq.event_ids;
  switch (inj.mode) {
    case InjectMode::foreign_token: {
      int k = std::max<int>(1, static_cast<int>(std::llround(inj.intensity * len)));
      auto pos = rng.sample_without_replacement(len, std::min(k, len));
      for (int p : pos)
        seq.event_ids[p] = grammar.n_templates + rng.uniform_int(grammar.n_templates);
      break;
    }
    case InjectMode::shuffle: {
      for (int attempt = 0; attempt < 16; ++attempt) {
        for (int i = len - 1; i > 0; --i)
          std::swap(seq.event_ids[i], seq.event_ids[rng.uniform_int(i + 1)]);
        if (seq.event_ids != original) return;
      }
      // all events identical; a permutation cannot differ, fall back
      seq.event_ids[len / 2] = grammar.n_templates;
      break;
    }
    case InjectMode::rare_transition: {
      int k = std::max<int>(1, static_cast<int>(std::llround(inj.intensity * len)));
      auto pos = rng.sample_without_replacement(len - 1, std::min(k, len - 1));
      for (int p : pos) {
        const int at = p + 1;  // rewrite the successor of position p
        const auto& row = grammar.transitions[seq.event_ids[at - 1]];
        int worst = -1;
        double worst_p = 2.0;
        for (int t = 0; t < grammar.n_templates; ++t) {
          if (t == original[at]) continue;
          if (row[t] < worst_p) {
            worst_p = row[t];
            worst = t;
          }
        }
        seq.event_ids[at] = worst;
      }
      break;
    }
  }
  if (seq.event_ids == original)  // guaranteed change
    seq.event_ids[0] = grammar.n_templates;
}

}  // namespace detail

// Corrupts exactly round(fraction * n) sequences, labels them 1, leaves the
// rest untouched. Order is preserved.
inline std::vector<EventSequence> inject(std::vector<EventSequence> seqs,
                                         const GrammarSpec& grammar, const AnomalyInjector& inj,
                                         double fraction, Rng& rng) {
  inj.validate();
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("inject: fraction must be in (0,1)");
  const int n = static_cast<int>(seqs.size());
  const int k = static_cast<int>(std::llround(fraction * n));
  auto chosen = rng.sample_without_replacement(n, k);
  std::sort(chosen.begin(), chosen.end());
  for (int idx : chosen) {
    detail::inject_one(seqs[idx], grammar, inj, rng);
    seqs[idx].label = 1;
  }
  return seqs;
}

// Round-robin over all three modes, for mixed-anomaly test sets.
inline std::vector<EventSequence> inject_mixed(std::vector<EventSequence> seqs,
                                               const GrammarSpec& grammar, double fraction,
                                               double intensity, Rng& rng) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("inject_mixed: fraction must be in (0,1)");
  const int n = static_cast<int>(seqs.size());
  const int k = static_cast<int>(std::llround(fraction * n));
  auto chosen = rng.sample_without_replacement(n, k);
  std::sort(chosen.begin(), chosen.end());
  const InjectMode modes[3] = {InjectMode::foreign_token, InjectMode::shuffle,
                               InjectMode::rare_transition};
  for (size_t i = 0; i < chosen.size(); ++i) {
    AnomalyInjector inj;
    inj.mode = modes[i % 3];
    detail::inject_one(seqs[chosen[i]], grammar, inj, rng);
    seqs[chosen[i]].label = 1;
  }
  return seqs;
}

}  // namespace logsieve
