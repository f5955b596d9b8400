#pragma once

// Discriminator-side objectives. Replaced-token detection is a per-token
// binary cross entropy over event positions (the [CLS] slot is skipped).
// Hyperspherical separation drives normal [CLS]-embedding norms toward the
// origin and pseudo-abnormal norms away; that norm is the anomaly score.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

namespace das_detail {

// log(1 - exp(-n)) without cancellation near n = 0.
inline double log1m_exp_neg(double n) { return std::log(-std::expm1(-n)); }

inline constexpr double kHstNormFloor = 1e-6;

}  // namespace das_detail

struct RtdBatchResult {
  double loss = 0.0;
  int64_t positions = 0;
};

// RTD logits for every event position of a packed CLS-prefixed batch.
// Returned flat, sequence by sequence.
template <class S>
std::vector<S> rtd_logits(const Matrix<S>& hidden, const RtdHead<S>& head,
                          const PackedBatch& batch) {
  std::vector<S> out;
  out.reserve(hidden.rows);
  const int D = hidden.cols;
  for (int s = 0; s < batch.n_seqs(); ++s) {
    for (int p = 1; p < batch.len(s); ++p) {  // skip [CLS] at position 0
      const S* h = hidden.row(batch.offsets[s] + p);
      S z = head.b.at(0, 0);
      for (int j = 0; j < D; ++j) z += h[j] * head.w.at(j, 0);
      out.push_back(z);
    }
  }
  return out;
}

// Mean BCE between sigmoid(logit) and the replaced flag over event positions.
// targets is flat and aligned with rtd_logits output.
template <class S>
double rtd_loss(const std::vector<S>& logits, const std::vector<uint8_t>& targets) {
  if (logits.empty()) throw std::invalid_argument("rtd_loss: no event positions");
  if (logits.size() != targets.size())
    throw std::invalid_argument("rtd_loss: targets misaligned");
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double z = static_cast<double>(logits[i]);
    const double m = targets[i] ? 1.0 : 0.0;
    // softplus(z) - m*z, stable form
    total += std::max(z, 0.0) - m * z + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

// RTD loss plus gradients: d_hidden receives rows for every packed position
// (zero at [CLS]); head gradients accumulate.
template <class S>
double rtd_loss_and_grad(const Matrix<S>& hidden, const RtdHead<S>& head,
                         const PackedBatch& batch, const std::vector<uint8_t>& targets,
                         Matrix<S>& d_hidden, RtdHead<S>& head_grads) {
  const int D = hidden.cols;
  d_hidden.resize(hidden.rows, D);
  int64_t count = 0;
  for (int s = 0; s < batch.n_seqs(); ++s) count += batch.len(s) - 1;
  if (count == 0) throw std::invalid_argument("rtd_loss_and_grad: no event positions");
  if (static_cast<size_t>(count) != targets.size())
    throw std::invalid_argument("rtd_loss_and_grad: targets misaligned");

  double total = 0.0;
  size_t flat = 0;
  const double inv_count = 1.0 / static_cast<double>(count);
  for (int s = 0; s < batch.n_seqs(); ++s) {
    for (int p = 1; p < batch.len(s); ++p, ++flat) {
      const int t = batch.offsets[s] + p;
      const S* h = hidden.row(t);
      double z = static_cast<double>(head.b.at(0, 0));
      for (int j = 0; j < D; ++j)
        z += static_cast<double>(h[j]) * static_cast<double>(head.w.at(j, 0));
      const double m = targets[flat] ? 1.0 : 0.0;
      total += std::max(z, 0.0) - m * z + std::log1p(std::exp(-std::abs(z)));
      const double sig = 1.0 / (1.0 + std::exp(-z));
      const S dz = static_cast<S>((sig - m) * inv_count);
      S* dh = d_hidden.row(t);
      for (int j = 0; j < D; ++j) {
        dh[j] = dz * head.w.at(j, 0);
        head_grads.w.at(j, 0) += dz * h[j];
      }
      head_grads.b.at(0, 0) += dz;
    }
  }
  return total * inv_count;
}

struct HstResult {
  double loss = 0.0;
  std::vector<double> norms;
};

// Loss value only, from precomputed norms.
inline double hst_loss(const std::vector<double>& norms, const std::vector<int>& labels,
                       double lambda) {
  if (norms.size() != labels.size()) throw std::invalid_argument("hst_loss: size mismatch");
  if (norms.empty()) throw std::invalid_argument("hst_loss: empty batch");
  if (!(lambda > 0.0)) throw std::invalid_argument("hst_loss: lambda must be positive");
  double total = 0.0;
  for (size_t i = 0; i < norms.size(); ++i) {
    const double n = norms[i];
    if (!std::isfinite(n) || n < 0.0) throw std::runtime_error("hst_loss: invalid norm");
    if (labels[i] == 0) {
      total += n;
    } else {
      const double nf = std::max(n, das_detail::kHstNormFloor);
      total += -lambda * das_detail::log1m_exp_neg(nf);
    }
  }
  return total / static_cast<double>(norms.size());
}

// Loss and gradient with respect to the [CLS] embeddings (one row each).
template <class S>
HstResult hst_loss_and_grad(const Matrix<S>& cls_rows, const std::vector<int>& labels,
                            double lambda, Matrix<S>& d_cls) {
  const int B = cls_rows.rows;
  if (B == 0) throw std::invalid_argument("hst_loss_and_grad: empty batch");
  if (static_cast<size_t>(B) != labels.size())
    throw std::invalid_argument("hst_loss_and_grad: labels misaligned");
  if (!(lambda > 0.0)) throw std::invalid_argument("hst_loss_and_grad: lambda must be positive");
  d_cls.resize(B, cls_rows.cols);
  HstResult out;
  out.norms.resize(B);
  const double inv_b = 1.0 / B;
  for (int i = 0; i < B; ++i) {
    const S* e = cls_rows.row(i);
    double sq = 0.0;
    for (int j = 0; j < cls_rows.cols; ++j) sq += static_cast<double>(e[j]) * e[j];
    const double n = std::sqrt(sq);
    if (!std::isfinite(n)) throw std::runtime_error("hst_loss_and_grad: non-finite norm");
    out.norms[i] = n;
    S* d = d_cls.row(i);
    if (labels[i] == 0) {
      out.loss += n * inv_b;
      // d||e||/de = e/||e||; defined as zero at the origin
      const double scale = n > 0.0 ? inv_b / n : 0.0;
      for (int j = 0; j < cls_rows.cols; ++j) d[j] = static_cast<S>(e[j] * scale);
    } else {
      const double nf = std::max(n, das_detail::kHstNormFloor);
      out.loss += -lambda * das_detail::log1m_exp_neg(nf) * inv_b;
      // d/dn of -lambda*log(1-exp(-n)) = -lambda/expm1(n)
      const double dn = -lambda / std::expm1(nf) * inv_b;
      const double scale = dn / nf;
      for (int j = 0; j < cls_rows.cols; ++j) d[j] = static_cast<S>(e[j] * scale);
    }
  }
  return out;
}

// Euclidean norm of the final-layer [CLS] hidden state, one per sequence.
// The whole scoring path is a single discriminator forward in eval mode.
template <class S>
std::vector<double> anomaly_scores(const DiscriminatorModel<S>& model, const PackedBatch& batch) {
  if (model.encoder.layers.empty())
    throw std::runtime_error("anomaly_scores: discriminator parameters not loaded");
  Matrix<S> hidden = encoder_forward(batch, model.encoder, model.config, /*train_mode=*/false);
  std::vector<double> out(batch.n_seqs());
  for (int s = 0; s < batch.n_seqs(); ++s) {
    const S* h = hidden.row(batch.offsets[s]);  // [CLS] row
    double sq = 0.0;
    for (int j = 0; j < hidden.cols; ++j) sq += static_cast<double>(h[j]) * h[j];
    out[s] = std::sqrt(sq);
  }
  return out;
}

}  // namespace logsieve
