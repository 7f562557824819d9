#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tgnet/autodiff.hpp"
#include "tgnet/grid.hpp"
#include "tgnet/params.hpp"
#include "tgnet/rng.hpp"

#include "json.hpp"

namespace tgnet {

enum class Aggregator { kMean, kConv3x3 };

const char* aggregator_name(Aggregator a);
Aggregator aggregator_from_name(const std::string& s);

struct TGNetConfig {
  int t_demand = 8;
  int t_dropoff = 16;
  int n_gn_layers = 6;
  int nf = 32;
  // Per-layer width multipliers on nf; empty derives a doubling ladder.
  std::vector<int> width_ratios;
  int tge_dim = 16;
  int dropoff_layers = 2;
  int dropoff_width = 64;
  int head_width = 0;  // 0 -> 2*nf
  double dropout_p = 0.1;
  bool use_tge = true;
  bool use_dropoff = true;
  bool use_pooling = true;
  Aggregator aggregator = Aggregator::kMean;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
  int key_dim = 57;

  void validate() const;
  std::vector<int> gn_widths() const;
  int head_width_or_default() const { return head_width > 0 ? head_width : 2 * nf; }

  nlohmann::json to_json() const;
  static TGNetConfig from_json(const nlohmann::json& j);
};

// One assembled mini-batch. Node rows are example-major, node-minor;
// demand/dropoff windows and targets are in scaled space.
struct BatchInputs {
  int batch = 0;
  Tensor demand;   // (B*N) x T_d
  Tensor dropoff;  // (B*N) x T_p, may be empty when the branch is off
  Tensor keys;     // B x key_dim, may be empty when TGE is off
  Tensor target;   // (B*N) x 1, empty outside training
};

// Graph-network forecaster: K graph-network layers with mean (or 3x3 conv)
// neighbor aggregation, one 2x2 pooling stage with a skip concatenation,
// a temporal-context embedding conditioning the input, a drop-off feature
// branch fused before the output head, and a ReLU head that keeps
// predictions non-negative.
class TGNetModel {
 public:
  TGNetModel(const TGNetConfig& cfg, int grid_rows, int grid_cols,
             std::uint64_t init_seed);

  // Appends the forward graph to `tape`; returns the prediction node,
  // (B*N) x 1 in scaled space.
  ad::Id build_forward(ad::Tape& tape, const BatchInputs& in, ad::Mode mode,
                       Rng* dropout_rng);

  // Eval-mode forward, predictions mapped back to raw units.
  Tensor predict_raw(const BatchInputs& in);

  std::vector<double> tge_vector(const TemporalKey& key) const;

  std::size_t param_count() const { return params_.trainable_scalar_count(); }

  // Parameter gradients of the last build_forward, after tape.backward().
  std::unordered_map<std::string, Tensor> collect_grads(
      const ad::Tape& tape) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const TGNetConfig& config() const { return cfg_; }
  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  int n_nodes() const { return rows_ * cols_; }
  const RegionGraph& fine_graph() const { return fine_; }
  RegionGraph& fine_graph_mut() { return fine_; }
  RegionGraph& coarse_graph_mut() { return coarse_; }

  ScalePolicy demand_scale;
  ScalePolicy dropoff_scale;

  void save(const std::string& path) const;
  static TGNetModel load(const std::string& path);

 private:
  struct LayerNames {
    std::string w_nbr, k_nbr, w_self, w_comb, b_comb, bn_gamma, bn_beta,
        bn_mean, bn_var;
  };

  void add_gn_layer_params(const std::string& prefix, int in_width,
                           int out_width, Rng& rng);
  ad::Id gn_layer(ad::Tape& tape, ad::Id x, const std::string& prefix,
                  const RegionGraph* graph, int batch, int rows, int cols,
                  ad::Mode mode, Rng* rng);
  ad::Id param_leaf(ad::Tape& tape, const std::string& name);
  Tensor glorot(std::size_t fan_out, std::size_t fan_in,
                std::vector<std::size_t> shape, Rng& rng);

  TGNetConfig cfg_;
  int rows_;
  int cols_;
  RegionGraph fine_;
  RegionGraph coarse_;
  ParamStore params_;
  mutable std::unordered_map<std::string, ad::Id> last_leaves_;
};

}  // namespace tgnet
