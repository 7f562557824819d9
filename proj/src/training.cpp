#include "tgnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "tgnet/error.hpp"

namespace tgnet {

void TrainConfig::validate() const {
  if (lr0 <= 0.0) throw ConfigError("lr0 must be positive");
  if (decay < 0.0) throw ConfigError("decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (l2_phase < 0.0 || l2_phase > 1.0)
    throw ConfigError("l2_phase must be in [0, 1]");
  const double sum = f_train + f_val + f_test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  if (f_train <= 0.0 || f_val < 0.0 || f_test < 0.0)
    throw ConfigError("split fractions must be non-negative, train positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr0", lr0},
          {"decay", decay},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"l2_phase", l2_phase},
          {"f_train", f_train},
          {"f_val", f_val},
          {"f_test", f_test},
          {"seed", seed},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr0 = j.value("lr0", c.lr0);
  c.decay = j.value("decay", c.decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.l2_phase = j.value("l2_phase", c.l2_phase);
  c.f_train = j.value("f_train", c.f_train);
  c.f_val = j.value("f_val", c.f_val);
  c.f_test = j.value("f_test", c.f_test);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.validate();
  return c;
}

SplitCounts split_counts(int n, double f_train, double f_val, double f_test) {
  if (n < 0) throw ConfigError("negative example count");
  const double sum = f_train + f_val + f_test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  SplitCounts c;
  const int trainval =
      static_cast<int>(std::floor((f_train + f_val) * static_cast<double>(n)));
  c.n_test = n - trainval;
  const double val_share = f_val / (f_train + f_val);
  c.n_val = static_cast<int>(
      std::floor(val_share * static_cast<double>(trainval)));
  c.n_train = trainval - c.n_val;
  return c;
}

DataSplit make_examples(const DemandTensor& demand,
                        const DemandTensor& dropoff,
                        const HolidayCalendar& calendar, int t_demand,
                        int t_dropoff, double f_train, double f_val,
                        double f_test) {
  if (demand.spec.n_intervals() != dropoff.spec.n_intervals() ||
      demand.spec.n_cells() != dropoff.spec.n_cells())
    throw ConfigError("demand and dropoff tensors must share a grid spec");
  const int p = demand.spec.n_intervals();
  const int first_target = std::max(t_demand, t_dropoff);
  const int n = p - first_target;
  if (n <= 0)
    throw DataError("period too short: no interval has a full history window");

  const SplitCounts counts = split_counts(n, f_train, f_val, f_test);

  DataSplit split;
  split.demand = &demand;
  split.dropoff = &dropoff;
  split.t_demand = t_demand;
  split.t_dropoff = t_dropoff;

  auto fill_part = [&](ExamplePart& part, int begin, int count) {
    part.targets.reserve(count);
    part.keys.reserve(count);
    for (int i = 0; i < count; ++i) {
      const int target = first_target + begin + i;
      part.targets.push_back(target);
      part.keys.push_back(temporal_key(target, demand.spec, calendar));
    }
  };
  fill_part(split.train, 0, counts.n_train);
  fill_part(split.val, counts.n_train, counts.n_val);
  fill_part(split.test, counts.n_train + counts.n_val, counts.n_test);

  // Scaling sees only intervals up to the last training target.
  const int train_end =
      counts.n_train > 0 ? split.train.targets.back() + 1 : first_target;
  split.demand_scale = fit_scale(demand, train_end);
  split.dropoff_scale = fit_scale(dropoff, train_end);
  return split;
}

BatchInputs assemble_batch(const DataSplit& split, const ExamplePart& part,
                           const std::vector<int>& subset) {
  const int n = split.n_nodes();
  const int b = static_cast<int>(subset.size());
  if (b == 0) throw ConfigError("empty batch");

  BatchInputs in;
  in.batch = b;
  in.demand = Tensor{static_cast<std::size_t>(b) * n,
                     static_cast<std::size_t>(split.t_demand)};
  in.dropoff = Tensor{static_cast<std::size_t>(b) * n,
                      static_cast<std::size_t>(split.t_dropoff)};
  const int key_dim = part.keys.empty() ? 0 : part.keys.front().dim();
  in.keys = Tensor{static_cast<std::size_t>(b),
                   static_cast<std::size_t>(key_dim)};
  in.target = Tensor{static_cast<std::size_t>(b) * n, std::size_t{1}};

  for (int e = 0; e < b; ++e) {
    const int idx = subset[e];
    const int target = part.targets[idx];
    const Tensor dw = node_features(*split.demand, target - 1, split.t_demand,
                                    split.demand_scale);
    const Tensor pw = node_features(*split.dropoff, target - 1,
                                    split.t_dropoff, split.dropoff_scale);
    std::copy(dw.data.begin(), dw.data.end(),
              in.demand.data.begin() +
                  static_cast<std::size_t>(e) * n * split.t_demand);
    std::copy(pw.data.begin(), pw.data.end(),
              in.dropoff.data.begin() +
                  static_cast<std::size_t>(e) * n * split.t_dropoff);
    const TemporalKey& key = part.keys[idx];
    for (int j = 0; j < key_dim; ++j)
      in.keys.at(e, static_cast<std::size_t>(j)) =
          static_cast<double>(key.bits[j]);
    for (int i = 0; i < n; ++i)
      in.target.data[static_cast<std::size_t>(e) * n + i] =
          split.demand_scale.apply(
              static_cast<double>(split.demand->at(target, i)));
  }
  return in;
}

namespace {

ad::Id loss_op(ad::Tape& tape, const std::string& phase, ad::Id pred,
               ad::Id target) {
  return phase == "l2" ? tape.mse_loss(pred, target)
                       : tape.mae_loss(pred, target);
}

std::vector<std::vector<int>> chunk(const std::vector<int>& order,
                                    int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(order.size(), at + batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

}  // namespace

double evaluate_loss(TGNetModel& model, const DataSplit& split,
                     const ExamplePart& part, const std::string& phase,
                     int batch_size) {
  if (part.targets.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::vector<int> order(part.targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  double acc = 0.0;
  std::size_t total = 0;
  for (const auto& batch : chunk(order, batch_size)) {
    const BatchInputs in = assemble_batch(split, part, batch);
    ad::Tape tape;
    const ad::Id pred = model.build_forward(tape, in, ad::Mode::kEval, nullptr);
    const ad::Id target = tape.leaf(in.target, false);
    const ad::Id loss = loss_op(tape, phase, pred, target);
    const std::size_t rows = in.target.size();
    acc += tape.scalar(loss) * static_cast<double>(rows);
    total += rows;
  }
  return acc / static_cast<double>(total);
}

TrainHistory train(TGNetModel& model, const DataSplit& split,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.targets.empty()) throw DataError("no training examples");

  model.demand_scale = split.demand_scale;
  model.dropoff_scale = split.dropoff_scale;

  AdamConfig adam;
  adam.lr0 = cfg.lr0;
  adam.decay = cfg.decay;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;

  Rng root(Rng::mix(cfg.seed, 0x747261696e5f5fULL));
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);

  const int l2_epochs = static_cast<int>(
      std::ceil(cfg.l2_phase * static_cast<double>(cfg.max_epochs)));
  const bool has_val = !split.val.targets.empty();

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_values = model.params().snapshot_values();
  int best_epoch = 0;
  int bad_epochs = 0;
  std::string prev_phase;

  std::vector<int> order(split.train.targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::string phase = epoch <= l2_epochs ? "l2" : "l1";
    if (phase != prev_phase) {
      // Loss units changed: comparisons against the old phase are
      // meaningless, so early stopping restarts here.
      best_val = std::numeric_limits<double>::infinity();
      best_values = model.params().snapshot_values();
      best_epoch = epoch;
      bad_epochs = 0;
      prev_phase = phase;
    }

    shuffle_rng.shuffle(order);
    double train_acc = 0.0;
    std::size_t train_rows = 0;
    double last_lr = adam.lr_at(model.params().global_step());
    for (const auto& batch : chunk(order, cfg.batch_size)) {
      const BatchInputs in = assemble_batch(split, split.train, batch);
      ad::Tape tape;
      const ad::Id pred =
          model.build_forward(tape, in, ad::Mode::kTrain, &dropout_rng);
      const ad::Id target = tape.leaf(in.target, false);
      const ad::Id loss = loss_op(tape, phase, pred, target);
      const double loss_value = tape.scalar(loss);
      if (!std::isfinite(loss_value))
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " (non-finite loss)");
      tape.backward(loss);
      last_lr = adam.lr_at(model.params().global_step());
      model.params().adam_step(model.collect_grads(tape), adam);
      const std::size_t rows = in.target.size();
      train_acc += loss_value * static_cast<double>(rows);
      train_rows += rows;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.train_loss = train_acc / static_cast<double>(train_rows);
    rec.val_loss = has_val ? evaluate_loss(model, split, split.val, phase,
                                           cfg.batch_size)
                           : std::numeric_limits<double>::quiet_NaN();
    rec.lr = last_lr;
    history.epochs.push_back(rec);
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %d [%s] train %.6g val %.6g lr %.6g\n",
                   epoch, phase.c_str(), rec.train_loss, rec.val_loss, rec.lr);

    if (has_val) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best_values = model.params().snapshot_values();
        best_epoch = epoch;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
        if (cfg.patience >= 0 && bad_epochs > cfg.patience) {
          history.early_stopped = true;
          break;
        }
      }
    } else {
      best_values = model.params().snapshot_values();
      best_epoch = epoch;
    }
  }

  model.params().restore_values(best_values);
  history.best_epoch = best_epoch;
  history.best_val = best_val;
  return history;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "epoch,phase,train_loss,val_loss,lr\n";
  char buf[160];
  for (const EpochRecord& rec : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%.17g\n", rec.epoch,
                  rec.phase.c_str(), rec.train_loss, rec.val_loss, rec.lr);
    out << buf;
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace tgnet
