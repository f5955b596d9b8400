#pragma once

// Adam with bias correction and global-norm gradient clipping. Moment buffers
// are keyed by position in the named-tensor list, which is stable per model.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "logsieve/encoder.hpp"

namespace logsieve {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

template <class S>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<NamedTensor<S>>& params, const std::vector<NamedTensor<S>>& grads) {
    if (params.size() != grads.size())
      throw std::invalid_argument("AdamOptimizer: param/grad list mismatch");
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m_[i].resize(params[i].tensor->rows, params[i].tensor->cols);
        v_[i].resize(params[i].tensor->rows, params[i].tensor->cols);
      }
    }

    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& g : grads)
        for (const S& x : g.tensor->data) sq += static_cast<double>(x) * x;
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    for (size_t i = 0; i < params.size(); ++i) {
      Matrix<S>& p = *params[i].tensor;
      const Matrix<S>& g = *grads[i].tensor;
      if (!p.same_shape(g))
        throw std::invalid_argument("AdamOptimizer: shape mismatch for " + params[i].name);
      Matrix<S>& m = m_[i];
      Matrix<S>& v = v_[i];
      for (size_t j = 0; j < p.data.size(); ++j) {
        const double gj = static_cast<double>(g.data[j]) * scale;
        const double mj = cfg_.beta1 * static_cast<double>(m.data[j]) + (1.0 - cfg_.beta1) * gj;
        const double vj = cfg_.beta2 * static_cast<double>(v.data[j]) + (1.0 - cfg_.beta2) * gj * gj;
        m.data[j] = static_cast<S>(mj);
        v.data[j] = static_cast<S>(vj);
        const double mhat = mj / bc1;
        const double vhat = vj / bc2;
        p.data[j] = static_cast<S>(static_cast<double>(p.data[j]) -
                                   lr * mhat / (std::sqrt(vhat) + cfg_.epsilon));
      }
    }
  }

  int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Matrix<S>> m_;
  std::vector<Matrix<S>> v_;
};

}  // namespace logsieve
