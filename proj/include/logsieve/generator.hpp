#pragma once

// Pseudo-anomaly synthesis: random masking of a normal sequence, then filling
// the masked slots either with uniform draws over the vocabulary (random
// generator) or with draws from the complement of a trained MLM's output
// distribution, which prefers tokens the MLM considers unlikely.
//
// Replacement candidates never include [PAD]/[CLS]/[MASK]; [UNK] is a legal
// candidate since out-of-vocabulary events are legitimate anomalies.
//
// Every generator operation bumps a global counter, which the detection path
// uses to prove it never touches the generator.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "logsieve/model.hpp"
#include "logsieve/rng.hpp"
#include "logsieve/vocab.hpp"

namespace logsieve {

inline std::atomic<uint64_t>& generator_op_counter() {
  static std::atomic<uint64_t> counter{0};
  return counter;
}

inline uint64_t generator_op_count() { return generator_op_counter().load(); }

using MaskPattern = std::vector<uint8_t>;

// Exactly round(r*d) masked positions (at least 1 when r > 0), chosen
// uniformly without replacement over the d real event positions.
inline MaskPattern sample_mask(int d, double ratio, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_mask: d must be >= 1");
  if (ratio < 0.0 || ratio > 1.0)
    throw std::invalid_argument("sample_mask: ratio must be in [0,1]");
  MaskPattern m(d, 0);
  int k = static_cast<int>(std::llround(ratio * d));
  if (ratio > 0.0 && k < 1) k = 1;
  if (k > d) k = d;
  if (k > 0)
    for (int p : rng.sample_without_replacement(d, k)) m[p] = 1;
  return m;
}

inline std::vector<TokenId> apply_mask(const std::vector<TokenId>& s, const MaskPattern& m) {
  if (s.size() != m.size()) throw std::invalid_argument("apply_mask: length mismatch");
  std::vector<TokenId> out = s;
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i]) out[i] = Vocabulary::kMask;
  return out;
}

namespace gen_detail {

// Candidate tokens: [UNK] plus all event indices. PAD/CLS/MASK excluded.
inline int candidate_count(int vocab_size) { return vocab_size - 3; }

inline TokenId candidate_at(int idx) {
  return idx == 0 ? Vocabulary::kUnk : static_cast<TokenId>(Vocabulary::kReserved + idx - 1);
}

inline int candidate_index(TokenId token) {
  if (token == Vocabulary::kUnk) return 0;
  if (token >= Vocabulary::kReserved) return token - Vocabulary::kReserved + 1;
  return -1;  // not a candidate
}

}  // namespace gen_detail

struct GeneratorOutput {
  std::vector<TokenId> tokens;
  MaskPattern replaced;  // equals the mask pattern
};

// Masked positions drawn uniformly from the candidate set minus the original
// token; the replacement can never equal the original.
inline GeneratorOutput random_generate(const std::vector<TokenId>& s, const MaskPattern& m,
                                       int vocab_size, Rng& rng) {
  if (s.size() != m.size()) throw std::invalid_argument("random_generate: length mismatch");
  if (vocab_size < 6)
    throw std::invalid_argument("random_generate: vocabulary too small for exclusion sampling");
  generator_op_counter().fetch_add(1, std::memory_order_relaxed);
  const int n_cand = gen_detail::candidate_count(vocab_size);
  GeneratorOutput out;
  out.tokens = s;
  out.replaced = m;
  for (size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    TokenId pick;
    do {
      pick = gen_detail::candidate_at(rng.uniform_int(n_cand));
    } while (pick == s[i]);
    out.tokens[i] = pick;
  }
  return out;
}

// Pointwise complement of a distribution, renormalized. Valid whenever the
// support has at least two entries.
inline std::vector<double> complement_distribution(const std::vector<double>& p) {
  if (p.size() < 2)
    throw std::invalid_argument("complement_distribution: support must have >= 2 entries");
  double denom = 0.0;
  for (double x : p) denom += 1.0 - x;
  if (!(denom > 0.0))
    throw std::invalid_argument("complement_distribution: degenerate support");
  std::vector<double> out(p.size());
  for (size_t i = 0; i < p.size(); ++i) out[i] = (1.0 - p[i]) / denom;
  return out;
}

// Positions of masked tokens in a packed batch, and their originals.
struct MaskedPositions {
  std::vector<int> packed_index;   // row into the packed hidden matrix
  std::vector<TokenId> truth;      // original token at that position
};

// Probability rows over the full vocabulary for each masked position of a
// packed masked batch. Reserved tokens other than [UNK] carry probability 0;
// each row sums to 1 over the candidate set. Deterministic in eval mode.
template <class S>
Matrix<double> mlm_forward(GeneratorModel<S>& model, const PackedBatch& masked_batch,
                           const MaskedPositions& masked, bool train_mode = false,
                           EncoderCache<S>* cache = nullptr, Rng* rng = nullptr,
                           Matrix<S>* hidden_out = nullptr) {
  generator_op_counter().fetch_add(1, std::memory_order_relaxed);
  Matrix<S> hidden =
      encoder_forward(masked_batch, model.encoder, model.config, train_mode, cache, rng);
  const int V = model.config.vocab_size;
  const int M = static_cast<int>(masked.packed_index.size());
  Matrix<double> probs(M, V);
  std::vector<double> logits(V);
  for (int r = 0; r < M; ++r) {
    const S* h = hidden.row(masked.packed_index[r]);
    for (int c = 0; c < V; ++c) {
      double z = static_cast<double>(model.head.b.at(0, c));
      for (int j = 0; j < model.config.embed_dim; ++j)
        z += static_cast<double>(h[j]) * static_cast<double>(model.head.w.at(j, c));
      logits[c] = z;
    }
    double max_z = -1e300;
    for (int c = 0; c < V; ++c)
      if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved) max_z = std::max(max_z, logits[c]);
    double denom = 0.0;
    for (int c = 0; c < V; ++c) {
      if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved) {
        probs.at(r, c) = std::exp(logits[c] - max_z);
        denom += probs.at(r, c);
      } else {
        probs.at(r, c) = 0.0;
      }
    }
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw std::runtime_error("mlm_forward: non-finite logits");
    for (int c = 0; c < V; ++c) probs.at(r, c) /= denom;
  }
  if (hidden_out) *hidden_out = std::move(hidden);
  return probs;
}

// Mean negative log-likelihood of the original tokens under P_G.
inline double mlm_loss(const Matrix<double>& probs, const std::vector<TokenId>& truth) {
  if (probs.rows == 0) throw std::invalid_argument("mlm_loss: no masked positions");
  if (static_cast<size_t>(probs.rows) != truth.size())
    throw std::invalid_argument("mlm_loss: row count disagrees with truth");
  double total = 0.0;
  for (int r = 0; r < probs.rows; ++r) {
    const double p = probs.at(r, truth[r]);
    total += -std::log(std::max(p, 1e-300));
  }
  return total / probs.rows;
}

// MLM loss with gradients for the whole generator, GEMM path. The loss is the
// mean negative log-likelihood of the original tokens at masked positions,
// with probabilities renormalized over the candidate set. Gradients
// accumulate into grads, which must be zero-shaped beforehand.
template <class S>
double mlm_loss_and_grad(GeneratorModel<S>& model, const PackedBatch& masked_batch,
                         const MaskedPositions& masked, GeneratorModel<S>& grads,
                         bool train_mode = true, Rng* rng = nullptr) {
  if (masked.packed_index.empty())
    throw std::invalid_argument("mlm_loss_and_grad: no masked positions");
  generator_op_counter().fetch_add(1, std::memory_order_relaxed);
  EncoderCache<S> cache;
  Matrix<S> hidden =
      encoder_forward(masked_batch, model.encoder, model.config, train_mode, &cache, rng);
  const int M = static_cast<int>(masked.packed_index.size());
  const int D = model.config.embed_dim;
  const int V = model.config.vocab_size;

  Matrix<S> rows(M, D);
  for (int r = 0; r < M; ++r) {
    const S* src = hidden.row(masked.packed_index[r]);
    std::copy(src, src + D, rows.row(r));
  }
  Matrix<S> logits(M, V);
  matmul(rows, model.head.w, logits);
  enc_detail::add_bias(logits, model.head.b);

  // softmax over the candidate set; excluded reserved tokens get exact zero
  double loss = 0.0;
  Matrix<S> d_logits(M, V);
  const double inv_m = 1.0 / M;
  for (int r = 0; r < M; ++r) {
    const S* z = logits.row(r);
    double max_z = -1e300;
    for (int c = 0; c < V; ++c)
      if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved)
        max_z = std::max(max_z, static_cast<double>(z[c]));
    double denom = 0.0;
    std::vector<double> p(V, 0.0);
    for (int c = 0; c < V; ++c) {
      if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved) {
        p[c] = std::exp(static_cast<double>(z[c]) - max_z);
        denom += p[c];
      }
    }
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw std::runtime_error("mlm_loss_and_grad: non-finite logits");
    const TokenId truth = masked.truth[r];
    const int truth_idx = gen_detail::candidate_index(truth);
    if (truth_idx < 0)
      throw std::invalid_argument("mlm_loss_and_grad: truth token is reserved");
    for (int c = 0; c < V; ++c) p[c] /= denom;
    loss += -std::log(std::max(p[truth], 1e-300)) * inv_m;
    S* dz = d_logits.row(r);
    for (int c = 0; c < V; ++c)
      dz[c] = static_cast<S>((p[c] - (c == truth ? 1.0 : 0.0)) * inv_m);
  }

  // head gradients and the gradient into the hidden rows
  {
    Matrix<S> rows_t = transposed(rows);
    matmul(rows_t, d_logits, grads.head.w, /*accumulate=*/true);
    for (int r = 0; r < M; ++r) {
      const S* dz = d_logits.row(r);
      S* db = grads.head.b.row(0);
      for (int c = 0; c < V; ++c) db[c] += dz[c];
    }
  }
  Matrix<S> d_rows(M, D);
  {
    Matrix<S> w_t = transposed(model.head.w);
    matmul(d_logits, w_t, d_rows);
  }
  Matrix<S> d_hidden(hidden.rows, D);
  for (int r = 0; r < M; ++r) {
    const S* src = d_rows.row(r);
    S* dst = d_hidden.row(masked.packed_index[r]);
    for (int j = 0; j < D; ++j) dst[j] += src[j];
  }
  encoder_backward(cache, model.encoder, model.config, d_hidden, grads.encoder);
  return loss;
}

// Batched complement-distribution generation for a set of sequences: one
// packed forward for the whole batch.
template <class S>
std::vector<GeneratorOutput> mlm_generate_batch(GeneratorModel<S>& model,
                                                const std::vector<std::vector<TokenId>>& seqs,
                                                const std::vector<MaskPattern>& masks, Rng& rng) {
  if (seqs.size() != masks.size())
    throw std::invalid_argument("mlm_generate_batch: size mismatch");
  generator_op_counter().fetch_add(1, std::memory_order_relaxed);
  std::vector<GeneratorOutput> out(seqs.size());
  PackedBatch batch;
  MaskedPositions masked;
  int base = 0;
  for (size_t i = 0; i < seqs.size(); ++i) {
    out[i].tokens = seqs[i];
    out[i].replaced = masks[i];
    batch.append(apply_mask(seqs[i], masks[i]));
    for (size_t j = 0; j < masks[i].size(); ++j)
      if (masks[i][j]) {
        masked.packed_index.push_back(base + static_cast<int>(j));
        masked.truth.push_back(seqs[i][j]);
      }
    base += static_cast<int>(seqs[i].size());
  }
  if (masked.packed_index.empty()) return out;

  Matrix<S> hidden = encoder_forward(batch, model.encoder, model.config, /*train_mode=*/false);
  const int M = static_cast<int>(masked.packed_index.size());
  const int D = model.config.embed_dim;
  const int V = model.config.vocab_size;
  Matrix<S> rows(M, D);
  for (int r = 0; r < M; ++r) {
    const S* src = hidden.row(masked.packed_index[r]);
    std::copy(src, src + D, rows.row(r));
  }
  Matrix<S> logits(M, V);
  matmul(rows, model.head.w, logits);
  enc_detail::add_bias(logits, model.head.b);

  const int n_cand = gen_detail::candidate_count(V);
  std::vector<double> support(n_cand);
  // map packed positions back to (sequence, position)
  size_t seq_idx = 0;
  for (int r = 0; r < M; ++r) {
    while (masked.packed_index[r] >= batch.offsets[static_cast<int>(seq_idx) + 1]) ++seq_idx;
    const S* z = logits.row(r);
    double max_z = -1e300;
    for (int c = 0; c < n_cand; ++c)
      max_z = std::max(max_z, static_cast<double>(z[gen_detail::candidate_at(c)]));
    double denom = 0.0;
    for (int c = 0; c < n_cand; ++c) {
      support[c] = std::exp(static_cast<double>(z[gen_detail::candidate_at(c)]) - max_z);
      denom += support[c];
    }
    for (int c = 0; c < n_cand; ++c) support[c] /= denom;
    auto comp = complement_distribution(support);
    const int pick = rng.categorical(comp);
    const int pos = masked.packed_index[r] - batch.offsets[static_cast<int>(seq_idx)];
    out[seq_idx].tokens[pos] = gen_detail::candidate_at(pick);
  }
  return out;
}

// Masked positions sampled from the complement distribution of each row.
template <class S>
GeneratorOutput mlm_generate(GeneratorModel<S>& model, const std::vector<TokenId>& s,
                             const MaskPattern& m, Rng& rng) {
  if (s.size() != m.size()) throw std::invalid_argument("mlm_generate: length mismatch");
  generator_op_counter().fetch_add(1, std::memory_order_relaxed);
  GeneratorOutput out;
  out.tokens = s;
  out.replaced = m;

  PackedBatch batch;
  batch.append(apply_mask(s, m));
  MaskedPositions masked;
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i]) {
      masked.packed_index.push_back(static_cast<int>(i));
      masked.truth.push_back(s[i]);
    }
  if (masked.packed_index.empty()) return out;

  Matrix<double> probs = mlm_forward(model, batch, masked);
  const int V = model.config.vocab_size;
  std::vector<double> support;
  support.reserve(gen_detail::candidate_count(V));
  for (int r = 0; r < probs.rows; ++r) {
    support.clear();
    for (int c = 0; c < V; ++c)
      if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved) support.push_back(probs.at(r, c));
    auto comp = complement_distribution(support);
    const int pick = rng.categorical(comp);
    out.tokens[masked.packed_index[r]] = gen_detail::candidate_at(pick);
  }
  return out;
}

}  // namespace logsieve
