#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "tgnet/tensor.hpp"

#include "json.hpp"

namespace tgnet {

struct AdamConfig {
  double lr0 = 0.01;
  double decay = 0.01;  // inverse-time step-size decay over update count
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // lr for the (zero-based) update index t.
  double lr_at(std::int64_t t) const {
    return lr0 / (1.0 + decay * static_cast<double>(t));
  }
};

// Named parameters plus per-parameter Adam state. Entry addresses are stable
// (deque), so batch-norm running stats can be referenced by pointer.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init, bool trainable = true);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  bool trainable(const std::string& name) const;
  std::vector<std::string> names() const;  // insertion order
  std::size_t trainable_scalar_count() const;
  std::int64_t global_step() const { return global_step_; }

  // One update over all trainable entries; grads keyed by name, missing
  // entries mean zero gradient.
  void adam_step(const std::unordered_map<std::string, Tensor>& grads,
                 const AdamConfig& cfg);

  // Value-only snapshot in entry order (includes non-trainables).
  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& values);

  nlohmann::json manifest() const;

  // Checkpoint: magic "TGCK1", u32 manifest length, manifest JSON (with an
  // arbitrary `config` block), then little-endian f64 values in manifest
  // order.
  static void write_checkpoint(const std::string& path,
                               const ParamStore& store,
                               const nlohmann::json& config);
  // Fills values of an already-constructed store by name; returns the
  // `config` block.
  static nlohmann::json read_checkpoint(const std::string& path,
                                        ParamStore& store);
  // Reads only the config block (to construct the store first).
  static nlohmann::json peek_config(const std::string& path);

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor m;
    Tensor v;
    std::int64_t step = 0;
    bool trainable = true;
  };

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t global_step_ = 0;
};

}  // namespace tgnet
