#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tgnet/graph.hpp"
#include "tgnet/rng.hpp"
#include "tgnet/tensor.hpp"

namespace tgnet::ad {

using Id = std::int32_t;

enum class Mode { kTrain, kEval };

// Reverse-mode tape over 2-D tensors. Node creation order is a topological
// order, so backward() is a single reverse sweep. Gradients accumulate, which
// handles fan-out for free.
class Tape {
 public:
  static constexpr Id kNone = -1;

  Id leaf(Tensor value, bool requires_grad = false);

  // y = x * w^T (+ b). w is [out x in] so a row is one output unit.
  Id dense(Id x, Id w, Id b = kNone);
  Id relu(Id x);
  Id add(Id a, Id b);
  Id concat_cols(Id a, Id b);

  // Mean over each node's neighbors, per example block. The graph must
  // outlive the tape.
  Id neighbor_mean(Id x, const RegionGraph* graph, int batch);

  // Train mode normalizes by batch statistics and folds them into the
  // running estimates; eval mode reads the running estimates.
  Id batch_norm(Id x, Id gamma, Id beta, Tensor* running_mean,
                Tensor* running_var, Mode mode, double momentum, double eps);

  // Inverted dropout: eval mode and p = 0 are the identity.
  Id dropout(Id x, double p, Mode mode, Rng* rng);

  Id avg_pool_grid(Id x, int batch, int rows, int cols);
  Id nearest_unpool(Id x, int batch, int rows, int cols);
  Id conv3x3(Id x, Id kernel, int batch, int rows, int cols);

  // Concat one row of `per_example` [B x D] onto each of the `nodes` rows of
  // the matching example block of x [(B*nodes) x F].
  Id concat_broadcast(Id x, Id per_example, int nodes);

  Id mse_loss(Id pred, Id target);
  Id mae_loss(Id pred, Id target);

  void backward(Id root);

  const Tensor& val(Id id) const { return nodes_[id].value; }
  const Tensor& grad(Id id) const { return nodes_[id].grad; }
  double scalar(Id id) const { return nodes_[id].value.data[0]; }
  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, Id)> back;  // second arg: the node's own id
  };

  Id push(Tensor value, bool requires_grad,
          std::function<void(Tape&, Id)> back);
  Tensor& grad_mut(Id id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

void assert_all_finite(const Tensor& t, const char* what);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
};

// Builds a scalar loss from leaves created from `params` in a fresh tape.
using LossFn = std::function<Id(Tape&, const std::vector<Id>&)>;

// Central differences against the tape gradient at randomly sampled
// elements; samples_per_tensor = 0 checks every element.
GradCheckReport grad_check(const LossFn& fn, const std::vector<Tensor>& params,
                           std::size_t samples_per_tensor, double step,
                           Rng& rng);

}  // namespace tgnet::ad
