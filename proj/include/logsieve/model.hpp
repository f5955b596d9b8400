#pragma once

// Generator and discriminator aggregates: a shared encoder trunk plus a
// vocabulary-projection head (MLM generator) or a per-token binary head
// (replaced-token detection). Both expose a flat named-tensor list for the
// optimizer and the checkpoint writer.

#include <string>
#include <vector>

#include "logsieve/encoder.hpp"

namespace logsieve {

template <class S>
struct MlmHead {
  Matrix<S> w;  // embed_dim x vocab_size
  Matrix<S> b;  // 1 x vocab_size

  void init(const EncoderConfig& cfg, Rng& rng) {
    w.resize(cfg.embed_dim, cfg.vocab_size);
    for (auto& x : w.data) x = static_cast<S>(rng.truncated_normal(0.02));
    b.resize(1, cfg.vocab_size);
  }

  void zero_like(const MlmHead& o) {
    w.resize(o.w.rows, o.w.cols);
    b.resize(o.b.rows, o.b.cols);
  }

  std::vector<NamedTensor<S>> named_tensors() {
    return {{"mlm_head.w", &w}, {"mlm_head.b", &b}};
  }
};

template <class S>
struct RtdHead {
  Matrix<S> w;  // embed_dim x 1
  Matrix<S> b;  // 1 x 1

  void init(const EncoderConfig& cfg, Rng& rng) {
    w.resize(cfg.embed_dim, 1);
    for (auto& x : w.data) x = static_cast<S>(rng.truncated_normal(0.02));
    b.resize(1, 1);
  }

  void zero_like(const RtdHead& o) {
    w.resize(o.w.rows, o.w.cols);
    b.resize(o.b.rows, o.b.cols);
  }

  std::vector<NamedTensor<S>> named_tensors() {
    return {{"rtd_head.w", &w}, {"rtd_head.b", &b}};
  }
};

template <class S>
struct GeneratorModel {
  EncoderConfig config;
  EncoderParams<S> encoder;
  MlmHead<S> head;

  void init(const EncoderConfig& cfg, Rng& rng) {
    config = cfg;
    encoder.init(cfg, rng);
    head.init(cfg, rng);
  }

  void zero_like(const GeneratorModel& o) {
    config = o.config;
    encoder.zero_like(o.encoder);
    head.zero_like(o.head);
  }

  void set_zero() {
    encoder.set_zero();
    head.w.set_zero();
    head.b.set_zero();
  }

  std::vector<NamedTensor<S>> named_tensors() {
    auto out = encoder.named_tensors();
    for (auto& t : head.named_tensors()) out.push_back(t);
    return out;
  }
};

template <class S>
struct DiscriminatorModel {
  EncoderConfig config;
  EncoderParams<S> encoder;
  RtdHead<S> head;

  void init(const EncoderConfig& cfg, Rng& rng) {
    config = cfg;
    encoder.init(cfg, rng);
    head.init(cfg, rng);
  }

  void zero_like(const DiscriminatorModel& o) {
    config = o.config;
    encoder.zero_like(o.encoder);
    head.zero_like(o.head);
  }

  void set_zero() {
    encoder.set_zero();
    head.w.set_zero();
    head.b.set_zero();
  }

  std::vector<NamedTensor<S>> named_tensors() {
    auto out = encoder.named_tensors();
    for (auto& t : head.named_tensors()) out.push_back(t);
    return out;
  }
};

}  // namespace logsieve
