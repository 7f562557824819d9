#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgnet/grid.hpp"
#include "tgnet/model.hpp"

#include "json.hpp"

namespace tgnet {

struct TrainConfig {
  double lr0 = 0.01;
  double decay = 0.01;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;  // negative disables early stopping
  double l2_phase = 0.25;
  double f_train = 0.64;
  double f_val = 0.16;
  double f_test = 0.20;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool verbose = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct SplitCounts {
  int n_train = 0;
  int n_val = 0;
  int n_test = 0;
};

// Floor-then-remainder: train+val gets floor((f_train+f_val)*n) and test the
// remainder; within train+val, val gets floor(share*count) and train the
// remainder. Chronological order: train, then val, then test.
SplitCounts split_counts(int n, double f_train, double f_val, double f_test);

struct ExamplePart {
  std::vector<int> targets;  // target interval indices, ascending
  std::vector<TemporalKey> keys;
};

// Windowed examples over a demand/dropoff tensor pair. Holds pointers into
// the caller's tensors; keep them alive.
struct DataSplit {
  const DemandTensor* demand = nullptr;
  const DemandTensor* dropoff = nullptr;
  int t_demand = 8;
  int t_dropoff = 16;
  ScalePolicy demand_scale;
  ScalePolicy dropoff_scale;
  ExamplePart train, val, test;

  int n_nodes() const { return demand->spec.n_cells(); }
};

DataSplit make_examples(const DemandTensor& demand,
                        const DemandTensor& dropoff,
                        const HolidayCalendar& calendar, int t_demand,
                        int t_dropoff, double f_train, double f_val,
                        double f_test);

// Materializes windows for part.targets[i] for each i in `subset`.
BatchInputs assemble_batch(const DataSplit& split, const ExamplePart& part,
                           const std::vector<int>& subset);

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "l2" or "l1"
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;      // epoch whose parameters were kept
  double best_val = 0.0;   // its validation loss (current-phase units)
  bool early_stopped = false;
};

// MSE for the first ceil(l2_phase*max_epochs) epochs, MAE after; Adam with
// inverse-time decay; early stopping on validation loss with best-parameter
// restore. Validation comparisons reset at the phase switch.
TrainHistory train(TGNetModel& model, const DataSplit& split,
                   const TrainConfig& cfg);

// Mean loss per element over a whole part, eval mode. phase: "l2" or "l1".
double evaluate_loss(TGNetModel& model, const DataSplit& split,
                     const ExamplePart& part, const std::string& phase,
                     int batch_size);

void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace tgnet
