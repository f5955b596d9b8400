#pragma once

// Compact post-norm transformer encoder with hand-written forward and
// backward passes. The same architecture serves the MLM generator and the
// discriminator. Sequences are processed packed (no pad tokens enter the
// math), so pad positions can never receive or contribute attention; a padded
// adapter exposes the conventional (batch, L, dim) view.
//
// Templated on the scalar so training runs in float while gradient checks run
// the identical code in double.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "logsieve/matrix.hpp"
#include "logsieve/rng.hpp"
#include "logsieve/vocab.hpp"

namespace logsieve {

struct EncoderConfig {
  int vocab_size = 0;
  int max_len = 512;
  int embed_dim = 256;
  int n_layers = 4;
  int n_heads = 4;
  int ff_dim = 256;
  double dropout_rate = 0.1;

  int head_dim() const { return embed_dim / n_heads; }

  void validate() const {
    if (vocab_size <= 0 || max_len <= 0 || embed_dim <= 0 || n_layers <= 0 ||
        n_heads <= 0 || ff_dim <= 0)
      throw std::invalid_argument("EncoderConfig: all dimensions must be positive");
    if (embed_dim % n_heads != 0)
      throw std::invalid_argument("EncoderConfig: embed_dim must be divisible by n_heads");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::invalid_argument("EncoderConfig: dropout_rate must be in [0,1)");
  }
};

template <class S>
struct NamedTensor {
  std::string name;
  Matrix<S>* tensor;
};

template <class S>
struct LayerParams {
  Matrix<S> wq, wk, wv, wo;              // embed_dim x embed_dim
  Matrix<S> w1, b1;                      // embed_dim x ff_dim, 1 x ff_dim
  Matrix<S> w2, b2;                      // ff_dim x embed_dim, 1 x embed_dim
  Matrix<S> ln1_scale, ln1_offset;       // 1 x embed_dim
  Matrix<S> ln2_scale, ln2_offset;       // 1 x embed_dim
};

template <class S>
struct EncoderParams {
  Matrix<S> token_embedding;             // vocab_size x embed_dim
  Matrix<S> pos_embedding;               // max_len x embed_dim
  std::vector<LayerParams<S>> layers;

  void init(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto trunc = [&rng](Matrix<S>& m, int rows, int cols) {
      m.resize(rows, cols);
      for (auto& x : m.data) x = static_cast<S>(rng.truncated_normal(0.02));
    };
    trunc(token_embedding, cfg.vocab_size, cfg.embed_dim);
    trunc(pos_embedding, cfg.max_len, cfg.embed_dim);
    layers.resize(cfg.n_layers);
    for (auto& l : layers) {
      trunc(l.wq, cfg.embed_dim, cfg.embed_dim);
      trunc(l.wk, cfg.embed_dim, cfg.embed_dim);
      trunc(l.wv, cfg.embed_dim, cfg.embed_dim);
      trunc(l.wo, cfg.embed_dim, cfg.embed_dim);
      trunc(l.w1, cfg.embed_dim, cfg.ff_dim);
      trunc(l.w2, cfg.ff_dim, cfg.embed_dim);
      l.b1.resize(1, cfg.ff_dim);
      l.b2.resize(1, cfg.embed_dim);
      l.ln1_scale.resize(1, cfg.embed_dim);
      l.ln1_offset.resize(1, cfg.embed_dim);
      l.ln2_scale.resize(1, cfg.embed_dim);
      l.ln2_offset.resize(1, cfg.embed_dim);
      for (auto& x : l.ln1_scale.data) x = S(1);
      for (auto& x : l.ln2_scale.data) x = S(1);
    }
  }

  // Zero-shaped like an initialized parameter set; used for gradients.
  void zero_like(const EncoderParams& other) {
    auto copy_shape = [](Matrix<S>& dst, const Matrix<S>& src) { dst.resize(src.rows, src.cols); };
    copy_shape(token_embedding, other.token_embedding);
    copy_shape(pos_embedding, other.pos_embedding);
    layers.resize(other.layers.size());
    for (size_t i = 0; i < layers.size(); ++i) {
      copy_shape(layers[i].wq, other.layers[i].wq);
      copy_shape(layers[i].wk, other.layers[i].wk);
      copy_shape(layers[i].wv, other.layers[i].wv);
      copy_shape(layers[i].wo, other.layers[i].wo);
      copy_shape(layers[i].w1, other.layers[i].w1);
      copy_shape(layers[i].b1, other.layers[i].b1);
      copy_shape(layers[i].w2, other.layers[i].w2);
      copy_shape(layers[i].b2, other.layers[i].b2);
      copy_shape(layers[i].ln1_scale, other.layers[i].ln1_scale);
      copy_shape(layers[i].ln1_offset, other.layers[i].ln1_offset);
      copy_shape(layers[i].ln2_scale, other.layers[i].ln2_scale);
      copy_shape(layers[i].ln2_offset, other.layers[i].ln2_offset);
    }
  }

  void set_zero() {
    token_embedding.set_zero();
    pos_embedding.set_zero();
    for (auto& l : layers) {
      l.wq.set_zero(); l.wk.set_zero(); l.wv.set_zero(); l.wo.set_zero();
      l.w1.set_zero(); l.b1.set_zero(); l.w2.set_zero(); l.b2.set_zero();
      l.ln1_scale.set_zero(); l.ln1_offset.set_zero();
      l.ln2_scale.set_zero(); l.ln2_offset.set_zero();
    }
  }

  std::vector<NamedTensor<S>> named_tensors() {
    std::vector<NamedTensor<S>> out;
    out.push_back({"token_embedding", &token_embedding});
    out.push_back({"pos_embedding", &pos_embedding});
    for (size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      auto& l = layers[i];
      out.push_back({p + "wq", &l.wq});
      out.push_back({p + "wk", &l.wk});
      out.push_back({p + "wv", &l.wv});
      out.push_back({p + "wo", &l.wo});
      out.push_back({p + "w1", &l.w1});
      out.push_back({p + "b1", &l.b1});
      out.push_back({p + "w2", &l.w2});
      out.push_back({p + "b2", &l.b2});
      out.push_back({p + "ln1_scale", &l.ln1_scale});
      out.push_back({p + "ln1_offset", &l.ln1_offset});
      out.push_back({p + "ln2_scale", &l.ln2_scale});
      out.push_back({p + "ln2_offset", &l.ln2_offset});
    }
    return out;
  }
};

// Concatenated real tokens of a batch; offsets[i]..offsets[i+1] delimit
// sequence i. Pad tokens never enter.
struct PackedBatch {
  std::vector<TokenId> ids;
  std::vector<int> offsets{0};

  int n_seqs() const { return static_cast<int>(offsets.size()) - 1; }
  int total_tokens() const { return offsets.back(); }
  int len(int i) const { return offsets[i + 1] - offsets[i]; }

  void append(const std::vector<TokenId>& seq) {
    ids.insert(ids.end(), seq.begin(), seq.end());
    offsets.push_back(static_cast<int>(ids.size()));
  }

  static PackedBatch from_token_sequences(const std::vector<TokenSequence>& seqs) {
    PackedBatch b;
    for (const auto& s : seqs) {
      for (size_t i = 0; i < s.ids.size(); ++i)
        if (s.attn_mask[i]) b.ids.push_back(s.ids[i]);
      b.offsets.push_back(static_cast<int>(b.ids.size()));
    }
    return b;
  }
};

namespace enc_detail {

inline constexpr double kLnEps = 1e-6;

template <class S>
void add_bias(Matrix<S>& m, const Matrix<S>& bias) {
  for (int i = 0; i < m.rows; ++i) {
    S* r = m.row(i);
    const S* b = bias.row(0);
    for (int j = 0; j < m.cols; ++j) r[j] += b[j];
  }
}

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865475)));
}

template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865475)));
  const S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014327);
  return cdf + x * pdf;
}

template <class S>
struct LnCache {
  Matrix<S> xhat;            // normalized rows before scale/offset
  std::vector<S> inv_std;    // per row
};

template <class S>
void layer_norm_forward(const Matrix<S>& x, const Matrix<S>& scale, const Matrix<S>& offset,
                        Matrix<S>& out, LnCache<S>* cache) {
  const int n = x.cols;
  out.resize(x.rows, n);
  if (cache) {
    cache->xhat.resize(x.rows, n);
    cache->inv_std.assign(x.rows, S(0));
  }
  for (int i = 0; i < x.rows; ++i) {
    const S* xi = x.row(i);
    S mean = 0;
    for (int j = 0; j < n; ++j) mean += xi[j];
    mean /= S(n);
    S var = 0;
    for (int j = 0; j < n; ++j) {
      const S d = xi[j] - mean;
      var += d * d;
    }
    var /= S(n);
    const S inv_std = S(1) / std::sqrt(var + S(kLnEps));
    S* oi = out.row(i);
    S* xh = cache ? cache->xhat.row(i) : nullptr;
    const S* g = scale.row(0);
    const S* b = offset.row(0);
    for (int j = 0; j < n; ++j) {
      const S h = (xi[j] - mean) * inv_std;
      if (xh) xh[j] = h;
      oi[j] = g[j] * h + b[j];
    }
    if (cache) cache->inv_std[i] = inv_std;
  }
}

template <class S>
void layer_norm_backward(const Matrix<S>& d_out, const LnCache<S>& cache, const Matrix<S>& scale,
                         Matrix<S>& d_x, Matrix<S>& d_scale, Matrix<S>& d_offset) {
  const int n = d_out.cols;
  d_x.resize(d_out.rows, n);
  for (int i = 0; i < d_out.rows; ++i) {
    const S* dy = d_out.row(i);
    const S* xh = cache.xhat.row(i);
    const S* g = scale.row(0);
    S* ds = d_scale.row(0);
    S* db = d_offset.row(0);
    S sum_dxh = 0, sum_dxh_xh = 0;
    for (int j = 0; j < n; ++j) {
      ds[j] += dy[j] * xh[j];
      db[j] += dy[j];
      const S dxh = dy[j] * g[j];
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh[j];
    }
    const S inv_n = S(1) / S(n);
    S* dx = d_x.row(i);
    const S inv_std = cache.inv_std[i];
    for (int j = 0; j < n; ++j) {
      const S dxh = dy[j] * g[j];
      dx[j] = inv_std * (dxh - sum_dxh * inv_n - xh[j] * sum_dxh_xh * inv_n);
    }
  }
}

template <class S>
void check_finite(const Matrix<S>& m, const char* where) {
  for (const S& x : m.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error(std::string("encoder: non-finite values in ") + where);
}

}  // namespace enc_detail

template <class S>
struct LayerCache {
  Matrix<S> x;                         // layer input
  Matrix<S> q, k, v;                   // projections
  std::vector<Matrix<S>> probs;        // per seq: (n_heads*L) x L softmax rows
  std::vector<std::vector<uint8_t>> attn_keep;  // dropout keep mask, aligned to probs
  Matrix<S> ctx;                       // attention context, pre-Wo
  enc_detail::LnCache<S> ln1;
  Matrix<S> y1;                        // LN1 output, FF input
  Matrix<S> h1;                        // pre-GELU
  Matrix<S> g;                         // post-GELU
  std::vector<uint8_t> ff_keep;        // FF-output dropout keep mask
  enc_detail::LnCache<S> ln2;
};

template <class S>
struct EncoderCache {
  PackedBatch batch;
  bool train_mode = false;
  double dropout_rate = 0.0;
  std::vector<LayerCache<S>> layers;
  bool valid = false;
};

// Forward pass over a packed batch; returns one hidden row per real token.
// Deterministic when train_mode is off (dropout disabled). With train_mode on
// and a positive dropout rate, rng must be provided.
template <class S>
Matrix<S> encoder_forward(const PackedBatch& batch, const EncoderParams<S>& params,
                          const EncoderConfig& cfg, bool train_mode = false,
                          EncoderCache<S>* cache = nullptr, Rng* rng = nullptr) {
  cfg.validate();
  const int T = batch.total_tokens();
  const int D = cfg.embed_dim;
  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  const bool use_dropout = train_mode && cfg.dropout_rate > 0.0;
  if (use_dropout && !rng)
    throw std::invalid_argument("encoder_forward: dropout requires an rng in train mode");
  if (cache) {
    cache->batch = batch;
    cache->train_mode = train_mode;
    cache->dropout_rate = use_dropout ? cfg.dropout_rate : 0.0;
    cache->layers.assign(cfg.n_layers, {});
    cache->valid = true;
  }

  Matrix<S> x(T, D);
  for (int t = 0; t < T; ++t) {
    const TokenId id = batch.ids[t];
    if (id < 0 || id >= cfg.vocab_size)
      throw std::out_of_range("encoder_forward: token id " + std::to_string(id) +
                              " outside vocabulary of size " + std::to_string(cfg.vocab_size));
  }
  for (int s = 0; s < batch.n_seqs(); ++s) {
    const int L = batch.len(s);
    if (L > cfg.max_len)
      throw std::invalid_argument("encoder_forward: sequence length " + std::to_string(L) +
                                  " exceeds max_len " + std::to_string(cfg.max_len));
    for (int p = 0; p < L; ++p) {
      const int t = batch.offsets[s] + p;
      const S* tok = params.token_embedding.row(batch.ids[t]);
      const S* pos = params.pos_embedding.row(p);
      S* xt = x.row(t);
      for (int j = 0; j < D; ++j) xt[j] = tok[j] + pos[j];
    }
  }

  const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
  const S keep_scale = S(1) / S(1.0 - cfg.dropout_rate);

  Matrix<S> q(T, D), k(T, D), v(T, D), ctx(T, D), attn(T, D);
  Matrix<S> r1(T, D), y1(T, D), h1(T, cfg.ff_dim), g(T, cfg.ff_dim), f(T, D), r2(T, D);

  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams<S>& lp = params.layers[l];
    LayerCache<S>* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->x = x;

    matmul(x, lp.wq, q);
    matmul(x, lp.wk, k);
    matmul(x, lp.wv, v);

    if (lc) {
      lc->q = q;
      lc->k = k;
      lc->v = v;
      lc->probs.assign(batch.n_seqs(), {});
      lc->attn_keep.assign(batch.n_seqs(), {});
    }

    // attention, per sequence and head; keys never cross sequence bounds
    ctx.set_zero();
    std::vector<S> row(1);
    for (int s = 0; s < batch.n_seqs(); ++s) {
      const int L = batch.len(s);
      const int base = batch.offsets[s];
      Matrix<S>* probs_store = lc ? &lc->probs[s] : nullptr;
      std::vector<uint8_t>* keep_store = lc ? &lc->attn_keep[s] : nullptr;
      if (probs_store) probs_store->resize(H * L, L);
      if (keep_store && use_dropout) keep_store->assign(static_cast<size_t>(H) * L * L, 1);
      if (static_cast<int>(row.size()) < L) row.resize(L);
      for (int h = 0; h < H; ++h) {
        const int col = h * dh;
        for (int i = 0; i < L; ++i) {
          const S* qi = q.row(base + i) + col;
          S max_score = std::numeric_limits<S>::lowest();
          for (int j = 0; j < L; ++j) {
            const S* kj = k.row(base + j) + col;
            S dot = 0;
            for (int d = 0; d < dh; ++d) dot += qi[d] * kj[d];
            row[j] = dot * inv_sqrt_dh;
            max_score = std::max(max_score, row[j]);
          }
          S denom = 0;
          for (int j = 0; j < L; ++j) {
            row[j] = std::exp(row[j] - max_score);
            denom += row[j];
          }
          const S inv_denom = S(1) / denom;
          for (int j = 0; j < L; ++j) row[j] *= inv_denom;
          if (probs_store) {
            S* pr = probs_store->row(h * L + i);
            for (int j = 0; j < L; ++j) pr[j] = row[j];
          }
          // dropout on attention weights
          if (use_dropout) {
            for (int j = 0; j < L; ++j) {
              if (rng->bernoulli(cfg.dropout_rate)) {
                row[j] = 0;
                if (keep_store) (*keep_store)[(static_cast<size_t>(h) * L + i) * L + j] = 0;
              } else {
                row[j] *= keep_scale;
              }
            }
          }
          S* ci = ctx.row(base + i) + col;
          for (int d = 0; d < dh; ++d) ci[d] = 0;
          for (int j = 0; j < L; ++j) {
            const S w = row[j];
            if (w == S(0)) continue;
            const S* vj = v.row(base + j) + col;
            for (int d = 0; d < dh; ++d) ci[d] += w * vj[d];
          }
        }
      }
    }
    if (lc) lc->ctx = ctx;

    matmul(ctx, lp.wo, attn);
    for (size_t i = 0; i < r1.data.size(); ++i) r1.data[i] = x.data[i] + attn.data[i];
    enc_detail::layer_norm_forward(r1, lp.ln1_scale, lp.ln1_offset, y1,
                                   lc ? &lc->ln1 : nullptr);
    if (lc) lc->y1 = y1;

    matmul(y1, lp.w1, h1);
    enc_detail::add_bias(h1, lp.b1);
    if (lc) lc->h1 = h1;
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = enc_detail::gelu(h1.data[i]);
    if (lc) lc->g = g;
    matmul(g, lp.w2, f);
    enc_detail::add_bias(f, lp.b2);
    if (use_dropout) {
      if (lc) lc->ff_keep.assign(f.data.size(), 1);
      for (size_t i = 0; i < f.data.size(); ++i) {
        if (rng->bernoulli(cfg.dropout_rate)) {
          f.data[i] = 0;
          if (lc) lc->ff_keep[i] = 0;
        } else {
          f.data[i] *= keep_scale;
        }
      }
    }
    for (size_t i = 0; i < r2.data.size(); ++i) r2.data[i] = y1.data[i] + f.data[i];
    enc_detail::layer_norm_forward(r2, lp.ln2_scale, lp.ln2_offset, x,
                                   lc ? &lc->ln2 : nullptr);
    enc_detail::check_finite(x, ("layer " + std::to_string(l)).c_str());
  }
  return x;
}

// Backward pass. Accumulates into grads, which must be shaped like params
// (zeroed by the caller at batch start). d_out has one row per real token.
template <class S>
void encoder_backward(const EncoderCache<S>& cache, const EncoderParams<S>& params,
                      const EncoderConfig& cfg, const Matrix<S>& d_out,
                      EncoderParams<S>& grads) {
  if (!cache.valid)
    throw std::invalid_argument("encoder_backward: forward cache missing");
  const PackedBatch& batch = cache.batch;
  const int T = batch.total_tokens();
  const int D = cfg.embed_dim;
  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  if (d_out.rows != T || d_out.cols != D)
    throw std::invalid_argument("encoder_backward: gradient shape mismatch");
  const bool had_dropout = cache.dropout_rate > 0.0;
  const S keep_scale = S(1) / S(1.0 - cache.dropout_rate);
  const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

  Matrix<S> dx = d_out;
  Matrix<S> d_r2(T, D), d_f(T, D), d_g(T, cfg.ff_dim), d_h1(T, cfg.ff_dim), d_y1(T, D);
  Matrix<S> d_r1(T, D), d_attn(T, D), d_ctx(T, D), d_q(T, D), d_k(T, D), d_v(T, D);
  Matrix<S> tmp(T, D);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerParams<S>& lp = params.layers[l];
    const LayerCache<S>& lc = cache.layers[l];
    LayerParams<S>& gl = grads.layers[l];

    // LN2
    enc_detail::layer_norm_backward(dx, lc.ln2, lp.ln2_scale, d_r2, gl.ln2_scale,
                                    gl.ln2_offset);
    // r2 = y1 + dropout(f)
    d_f = d_r2;
    if (had_dropout)
      for (size_t i = 0; i < d_f.data.size(); ++i)
        d_f.data[i] = lc.ff_keep[i] ? d_f.data[i] * keep_scale : S(0);

    // f = g*w2 + b2
    for (int i = 0; i < T; ++i) {
      const S* dfi = d_f.row(i);
      S* db2 = gl.b2.row(0);
      for (int j = 0; j < D; ++j) db2[j] += dfi[j];
    }
    {
      Matrix<S> gt = transposed(lc.g);
      matmul(gt, d_f, gl.w2, /*accumulate=*/true);
      Matrix<S> w2t = transposed(lp.w2);
      matmul(d_f, w2t, d_g);
    }
    // g = gelu(h1)
    for (size_t i = 0; i < d_g.data.size(); ++i)
      d_h1.data[i] = d_g.data[i] * enc_detail::gelu_grad(lc.h1.data[i]);
    // h1 = y1*w1 + b1
    for (int i = 0; i < T; ++i) {
      const S* dhi = d_h1.row(i);
      S* db1 = gl.b1.row(0);
      for (int j = 0; j < cfg.ff_dim; ++j) db1[j] += dhi[j];
    }
    {
      Matrix<S> y1t = transposed(lc.y1);
      matmul(y1t, d_h1, gl.w1, /*accumulate=*/true);
      Matrix<S> w1t = transposed(lp.w1);
      matmul(d_h1, w1t, d_y1);
    }
    // residual into LN1 output
    for (size_t i = 0; i < d_y1.data.size(); ++i) d_y1.data[i] += d_r2.data[i];

    // LN1
    enc_detail::layer_norm_backward(d_y1, lc.ln1, lp.ln1_scale, d_r1, gl.ln1_scale,
                                    gl.ln1_offset);
    // r1 = x + ctx*wo
    d_attn = d_r1;
    {
      Matrix<S> ctxt = transposed(lc.ctx);
      matmul(ctxt, d_attn, gl.wo, /*accumulate=*/true);
      Matrix<S> wot = transposed(lp.wo);
      matmul(d_attn, wot, d_ctx);
    }

    // attention backward, mirrors the forward loops
    d_q.set_zero();
    d_k.set_zero();
    d_v.set_zero();
    std::vector<S> d_row, drop_row;
    for (int s = 0; s < batch.n_seqs(); ++s) {
      const int L = batch.len(s);
      const int base = batch.offsets[s];
      const Matrix<S>& probs = lc.probs[s];
      const std::vector<uint8_t>* keep = had_dropout ? &lc.attn_keep[s] : nullptr;
      if (static_cast<int>(d_row.size()) < L) {
        d_row.resize(L);
        drop_row.resize(L);
      }
      for (int h = 0; h < H; ++h) {
        const int col = h * dh;
        for (int i = 0; i < L; ++i) {
          const S* pr = probs.row(h * L + i);
          const S* dci = d_ctx.row(base + i) + col;
          // dropped probability row as used in the forward context product
          for (int j = 0; j < L; ++j) {
            S w = pr[j];
            if (keep) w = (*keep)[(static_cast<size_t>(h) * L + i) * L + j] ? w * keep_scale : S(0);
            drop_row[j] = w;
          }
          // d_v and d(dropped probs)
          for (int j = 0; j < L; ++j) {
            const S* vj = lc.v.row(base + j) + col;
            S dot = 0;
            for (int d = 0; d < dh; ++d) dot += dci[d] * vj[d];
            d_row[j] = dot;
            if (drop_row[j] != S(0)) {
              S* dvj = d_v.row(base + j) + col;
              const S w = drop_row[j];
              for (int d = 0; d < dh; ++d) dvj[d] += w * dci[d];
            }
          }
          // undo dropout, then softmax backward
          if (keep)
            for (int j = 0; j < L; ++j)
              d_row[j] = (*keep)[(static_cast<size_t>(h) * L + i) * L + j] ? d_row[j] * keep_scale : S(0);
          S dot_pd = 0;
          for (int j = 0; j < L; ++j) dot_pd += d_row[j] * pr[j];
          // d_scores[j] = p_j * (d_j - sum) ; scores were scaled by 1/sqrt(dh)
          const S* qi = lc.q.row(base + i) + col;
          S* dqi = d_q.row(base + i) + col;
          for (int j = 0; j < L; ++j) {
            const S ds = pr[j] * (d_row[j] - dot_pd) * inv_sqrt_dh;
            if (ds == S(0)) continue;
            const S* kj = lc.k.row(base + j) + col;
            S* dkj = d_k.row(base + j) + col;
            for (int d = 0; d < dh; ++d) {
              dqi[d] += ds * kj[d];
              dkj[d] += ds * qi[d];
            }
          }
        }
      }
    }

    // projections
    {
      Matrix<S> xt = transposed(lc.x);
      matmul(xt, d_q, gl.wq, /*accumulate=*/true);
      matmul(xt, d_k, gl.wk, /*accumulate=*/true);
      matmul(xt, d_v, gl.wv, /*accumulate=*/true);
      Matrix<S> wqt = transposed(lp.wq);
      matmul(d_q, wqt, dx);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += d_r1.data[i];
      Matrix<S> wkt = transposed(lp.wk);
      matmul(d_k, wkt, tmp);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += tmp.data[i];
      Matrix<S> wvt = transposed(lp.wv);
      matmul(d_v, wvt, tmp);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += tmp.data[i];
    }
  }

  // embeddings
  for (int s = 0; s < batch.n_seqs(); ++s) {
    const int L = batch.len(s);
    for (int p = 0; p < L; ++p) {
      const int t = batch.offsets[s] + p;
      const S* dxt = dx.row(t);
      S* dtok = grads.token_embedding.row(batch.ids[t]);
      S* dpos = grads.pos_embedding.row(p);
      for (int j = 0; j < D; ++j) {
        dtok[j] += dxt[j];
        dpos[j] += dxt[j];
      }
    }
  }
}

// Padded (batch, L, dim) view for fixed-length inputs. Pad rows are zero.
template <class S>
struct HiddenStates {
  int batch = 0, length = 0, dim = 0;
  std::vector<S> data;

  S* row(int b, int pos) {
    return data.data() + (static_cast<size_t>(b) * length + pos) * dim;
  }
  const S* row(int b, int pos) const {
    return data.data() + (static_cast<size_t>(b) * length + pos) * dim;
  }
};

template <class S>
HiddenStates<S> encoder_forward_padded(const std::vector<TokenSequence>& seqs,
                                       const EncoderParams<S>& params, const EncoderConfig& cfg) {
  PackedBatch batch = PackedBatch::from_token_sequences(seqs);
  Matrix<S> packed = encoder_forward(batch, params, cfg, /*train_mode=*/false);
  HiddenStates<S> out;
  out.batch = static_cast<int>(seqs.size());
  out.length = seqs.empty() ? 0 : static_cast<int>(seqs.front().ids.size());
  out.dim = cfg.embed_dim;
  out.data.assign(static_cast<size_t>(out.batch) * out.length * out.dim, S(0));
  for (int s = 0; s < out.batch; ++s) {
    int packed_pos = batch.offsets[s];
    int written = 0;
    for (size_t p = 0; p < seqs[s].ids.size(); ++p) {
      if (!seqs[s].attn_mask[p]) continue;
      const S* src = packed.row(packed_pos + written);
      std::copy(src, src + out.dim, out.row(s, static_cast<int>(p)));
      ++written;
    }
  }
  return out;
}

}  // namespace logsieve
