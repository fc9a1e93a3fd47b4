// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace loom {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'O', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kSentinel = 0xE0F0E0F0u;

// raw little-endian framing; doubles written byte-for-byte (IEEE-754 assumed)
struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  }
  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("checkpoint write failure");
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void i32(std::int32_t v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) i32(d);
    bytes(t.data.data(), t.data.size() * sizeof(double));
  }
};

struct Reader {
  std::ifstream in;
  std::string path;
  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw std::runtime_error("cannot read checkpoint: " + p);
  }
  void bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
      throw std::runtime_error("corrupt checkpoint (truncated): " + path);
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (n > (1u << 30)) throw std::runtime_error("corrupt checkpoint (bad string): " + path);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Tensor tensor() {
    std::uint32_t rank = u32();
    if (rank > 4) throw std::runtime_error("corrupt checkpoint (bad tensor rank): " + path);
    std::vector<int> shape;
    std::int64_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      int d = i32();
      if (d <= 0 || d > (1 << 26)) {
        throw std::runtime_error("corrupt checkpoint (bad tensor dim): " + path);
      }
      shape.push_back(d);
      total *= d;
    }
    std::vector<double> data(static_cast<std::size_t>(total));
    bytes(data.data(), data.size() * sizeof(double));
    return Tensor(std::move(shape), std::move(data));
  }
};

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const OptimizerState& optimizer, int epoch,
                     double best_valid_loss, std::int64_t global_step, int non_improving_epochs,
                     const std::string& path) {
  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(run_config_to_text(bundle.cfg));

  w.u64(static_cast<std::uint64_t>(bundle.vocab.size()));
  for (int i = 0; i < bundle.vocab.size(); ++i) w.str(bundle.vocab.token(i));

  w.u32(static_cast<std::uint32_t>(bundle.store.count()));
  for (int i = 0; i < bundle.store.count(); ++i) {
    const auto& e = bundle.store.entry(i);
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.group));
    w.tensor(e.value);
  }

  w.f64(optimizer.learning_rate);
  w.f64(optimizer.momentum);
  w.u32(static_cast<std::uint32_t>(optimizer.velocity.size()));
  for (const Tensor& v : optimizer.velocity) w.tensor(v);

  w.i32(epoch);
  w.f64(best_valid_loss);
  w.i64(global_step);
  w.i32(non_improving_epochs);
  w.u32(kSentinel);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " not supported (expected " + std::to_string(kVersion) + ")");
  }
  RunConfig cfg = run_config_from_text(r.str(), path + "#config");

  std::uint64_t vocab_count = r.u64();
  Vocabulary vocab;
  for (std::uint64_t i = 0; i < vocab_count; ++i) {
    std::string tok = r.str();
    if (i < 4) continue;  // reserved rows are fixed
    vocab.add(tok);
  }
  if (vocab.size() != static_cast<int>(vocab_count)) {
    throw std::runtime_error("corrupt checkpoint (vocabulary): " + path);
  }

  Checkpoint ck;
  ck.bundle = std::make_unique<ModelBundle>(cfg, vocab);

  std::uint32_t n_params = r.u32();
  if (static_cast<int>(n_params) != ck.bundle->store.count()) {
    throw std::runtime_error("checkpoint parameter count does not match the config: " + path);
  }
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.str();
    std::uint32_t group = r.u32();
    Tensor value = r.tensor();
    auto& entry = ck.bundle->store.entry(static_cast<int>(i));
    if (entry.name != name || static_cast<std::uint32_t>(entry.group) != group ||
        !entry.value.same_shape(value)) {
      throw std::runtime_error("checkpoint layout mismatch at " + name);
    }
    entry.value = std::move(value);
  }

  ck.optimizer.learning_rate = r.f64();
  ck.optimizer.momentum = r.f64();
  std::uint32_t n_vel = r.u32();
  if (n_vel != n_params) throw std::runtime_error("corrupt checkpoint (optimizer): " + path);
  for (std::uint32_t i = 0; i < n_vel; ++i) {
    Tensor v = r.tensor();
    if (!v.same_shape(ck.bundle->store.entry(static_cast<int>(i)).value)) {
      throw std::runtime_error("checkpoint velocity shape mismatch");
    }
    ck.optimizer.velocity.push_back(std::move(v));
  }

  ck.epoch = r.i32();
  ck.best_valid_loss = r.f64();
  ck.global_step = r.i64();
  ck.non_improving_epochs = r.i32();
  if (r.u32() != kSentinel) throw std::runtime_error("corrupt checkpoint (sentinel): " + path);
  return ck;
}

}  // namespace loom
