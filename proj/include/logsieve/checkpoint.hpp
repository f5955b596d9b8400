#pragma once

// Versioned binary checkpoint: a fixed header with the encoder configuration,
// role and vocabulary hash, a manifest of (name, shape, byte offset), then
// raw tensor data in row-major 32-bit little-endian layout. One format for
// generator and discriminator checkpoints; round trips are byte exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

enum class CheckpointRole : uint8_t { generator = 0, discriminator = 1 };

namespace ckpt_detail {

inline constexpr uint32_t kMagic = 0x4c53434bu;  // "LSCK"
inline constexpr uint32_t kVersion = 1;

inline void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(std::string("checkpoint: truncated file reading ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error(std::string("checkpoint: truncated file reading ") + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in, const char* what) {
  const uint64_t bits = read_u64(in, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_f32_data(std::ostream& out, const Matrix<float>& m) {
  for (float x : m.data) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    write_u32(out, bits);
  }
}

struct ManifestEntry {
  std::string name;
  uint32_t rows = 0, cols = 0;
  uint64_t offset = 0;  // bytes into the data section
};

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, CheckpointRole role,
                            const EncoderConfig& cfg, uint64_t vocab_hash,
                            std::vector<NamedTensor<float>> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  using namespace ckpt_detail;
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  out.put(static_cast<char>(role));
  write_u32(out, static_cast<uint32_t>(cfg.vocab_size));
  write_u32(out, static_cast<uint32_t>(cfg.max_len));
  write_u32(out, static_cast<uint32_t>(cfg.embed_dim));
  write_u32(out, static_cast<uint32_t>(cfg.n_layers));
  write_u32(out, static_cast<uint32_t>(cfg.n_heads));
  write_u32(out, static_cast<uint32_t>(cfg.ff_dim));
  write_f64(out, cfg.dropout_rate);
  write_u64(out, vocab_hash);
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  uint64_t offset = 0;
  for (const auto& t : tensors) {
    write_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<uint32_t>(t.tensor->rows));
    write_u32(out, static_cast<uint32_t>(t.tensor->cols));
    write_u64(out, offset);
    offset += t.tensor->data.size() * 4;
  }
  for (const auto& t : tensors) write_f32_data(out, *t.tensor);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct CheckpointInfo {
  CheckpointRole role = CheckpointRole::generator;
  EncoderConfig config;
  uint64_t vocab_hash = 0;
};

// Reads only the header, leaving tensors untouched.
inline CheckpointInfo peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("peek_checkpoint: cannot open " + path);
  using namespace ckpt_detail;
  if (read_u32(in, "magic") != kMagic)
    throw std::runtime_error("peek_checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw std::runtime_error("peek_checkpoint: unsupported version " + std::to_string(version));
  CheckpointInfo info;
  int role_byte = in.get();
  if (role_byte < 0) throw std::runtime_error("checkpoint: truncated file reading role");
  info.role = static_cast<CheckpointRole>(role_byte);
  info.config.vocab_size = static_cast<int>(read_u32(in, "vocab_size"));
  info.config.max_len = static_cast<int>(read_u32(in, "max_len"));
  info.config.embed_dim = static_cast<int>(read_u32(in, "embed_dim"));
  info.config.n_layers = static_cast<int>(read_u32(in, "n_layers"));
  info.config.n_heads = static_cast<int>(read_u32(in, "n_heads"));
  info.config.ff_dim = static_cast<int>(read_u32(in, "ff_dim"));
  info.config.dropout_rate = read_f64(in, "dropout_rate");
  info.vocab_hash = read_u64(in, "vocab_hash");
  return info;
}

inline EncoderConfig peek_checkpoint_config(const std::string& path) {
  return peek_checkpoint(path).config;
}

// Loads into an existing named-tensor list; names, shapes and the vocabulary
// hash must all match.
inline CheckpointInfo load_checkpoint(const std::string& path,
                                      std::vector<NamedTensor<float>> tensors,
                                      uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  using namespace ckpt_detail;
  if (read_u32(in, "magic") != kMagic)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  CheckpointInfo info;
  int role_byte = in.get();
  if (role_byte < 0) throw std::runtime_error("checkpoint: truncated file reading role");
  info.role = static_cast<CheckpointRole>(role_byte);
  info.config.vocab_size = static_cast<int>(read_u32(in, "vocab_size"));
  info.config.max_len = static_cast<int>(read_u32(in, "max_len"));
  info.config.embed_dim = static_cast<int>(read_u32(in, "embed_dim"));
  info.config.n_layers = static_cast<int>(read_u32(in, "n_layers"));
  info.config.n_heads = static_cast<int>(read_u32(in, "n_heads"));
  info.config.ff_dim = static_cast<int>(read_u32(in, "ff_dim"));
  info.config.dropout_rate = read_f64(in, "dropout_rate");
  info.vocab_hash = read_u64(in, "vocab_hash");
  if (expected_vocab_hash != 0 && info.vocab_hash != expected_vocab_hash)
    throw std::runtime_error("load_checkpoint: vocabulary hash mismatch (checkpoint was trained "
                             "with a different vocabulary)");
  const uint32_t n_tensors = read_u32(in, "tensor count");
  if (n_tensors != tensors.size())
    throw std::runtime_error("load_checkpoint: expected " + std::to_string(tensors.size()) +
                             " tensors, file has " + std::to_string(n_tensors));
  std::vector<ManifestEntry> manifest(n_tensors);
  uint64_t expect_offset = 0;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    auto& e = manifest[i];
    const uint32_t name_len = read_u32(in, "name length");
    if (name_len > 4096)
      throw std::runtime_error("load_checkpoint: corrupt manifest at entry " + std::to_string(i));
    e.name.resize(name_len);
    if (!in.read(e.name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated file reading name");
    e.rows = read_u32(in, "rows");
    e.cols = read_u32(in, "cols");
    e.offset = read_u64(in, "offset");
    if (e.offset != expect_offset)
      throw std::runtime_error("load_checkpoint: corrupt manifest, entry " + e.name +
                               " offset " + std::to_string(e.offset) + " expected " +
                               std::to_string(expect_offset));
    expect_offset += static_cast<uint64_t>(e.rows) * e.cols * 4;
    if (e.name != tensors[i].name)
      throw std::runtime_error("load_checkpoint: tensor " + std::to_string(i) + " is '" +
                               e.name + "', expected '" + tensors[i].name + "'");
  }
  for (uint32_t i = 0; i < n_tensors; ++i) {
    Matrix<float>& m = *tensors[i].tensor;
    m.resize(static_cast<int>(manifest[i].rows), static_cast<int>(manifest[i].cols));
    for (auto& x : m.data) {
      const uint32_t bits = read_u32(in, manifest[i].name.c_str());
      std::memcpy(&x, &bits, 4);
    }
  }
  return info;
}

inline void save_checkpoint(const std::string& path, GeneratorModel<float>& model,
                            uint64_t vocab_hash) {
  save_checkpoint(path, CheckpointRole::generator, model.config, vocab_hash,
                  model.named_tensors());
}

inline void save_checkpoint(const std::string& path, DiscriminatorModel<float>& model,
                            uint64_t vocab_hash) {
  save_checkpoint(path, CheckpointRole::discriminator, model.config, vocab_hash,
                  model.named_tensors());
}

inline void load_checkpoint(const std::string& path, GeneratorModel<float>& model,
                            uint64_t expected_vocab_hash) {
  // shape the tensor list before loading
  Rng rng(0);
  if (model.encoder.layers.empty()) {
    EncoderConfig probe = peek_checkpoint_config(path);
    model.init(probe, rng);
  }
  auto info = load_checkpoint(path, model.named_tensors(), expected_vocab_hash);
  if (info.role != CheckpointRole::generator)
    throw std::runtime_error("load_checkpoint: " + path + " is not a generator checkpoint");
  model.config = info.config;
}

inline void load_checkpoint(const std::string& path, DiscriminatorModel<float>& model,
                            uint64_t expected_vocab_hash) {
  Rng rng(0);
  if (model.encoder.layers.empty()) {
    EncoderConfig probe = peek_checkpoint_config(path);
    model.init(probe, rng);
  }
  auto info = load_checkpoint(path, model.named_tensors(), expected_vocab_hash);
  if (info.role != CheckpointRole::discriminator)
    throw std::runtime_error("load_checkpoint: " + path + " is not a discriminator checkpoint");
  model.config = info.config;
}

}  // namespace logsieve
