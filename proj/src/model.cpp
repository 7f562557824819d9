#include "tgnet/model.hpp"

#include <cmath>

#include "tgnet/error.hpp"
#include "tgnet/kernels.hpp"

namespace tgnet {

const char* aggregator_name(Aggregator a) {
  return a == Aggregator::kMean ? "mean" : "conv3x3";
}

Aggregator aggregator_from_name(const std::string& s) {
  if (s == "mean") return Aggregator::kMean;
  if (s == "conv3x3") return Aggregator::kConv3x3;
  throw ConfigError("unknown aggregator: '" + s + "'");
}

void TGNetConfig::validate() const {
  if (t_demand < 1 || t_dropoff < 1) throw ConfigError("window lengths must be >= 1");
  if (n_gn_layers < 1) throw ConfigError("n_gn_layers must be >= 1");
  if (nf < 1 || dropoff_width < 1) throw ConfigError("layer widths must be >= 1");
  if (tge_dim < 0) throw ConfigError("tge_dim must be >= 0");
  if (dropoff_layers < 1) throw ConfigError("dropoff_layers must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must be in [0, 1)");
  if (!width_ratios.empty() &&
      width_ratios.size() != static_cast<std::size_t>(n_gn_layers))
    throw ConfigError("width_ratios must have one entry per GN layer");
  for (int r : width_ratios)
    if (r < 1) throw ConfigError("width ratios must be >= 1");
  if (use_pooling && n_gn_layers < 2)
    throw ConfigError("pooling needs at least 2 GN layers");
  if (key_dim < 10) throw ConfigError("key_dim too small for a calendar key");
}

std::vector<int> TGNetConfig::gn_widths() const {
  std::vector<int> widths(n_gn_layers);
  if (!width_ratios.empty()) {
    for (int k = 0; k < n_gn_layers; ++k) widths[k] = nf * width_ratios[k];
    return widths;
  }
  if (n_gn_layers == 6) {
    // Doubling ladder around the pooled stage.
    const int ladder[6] = {1, 2, 4, 8, 4, 1};
    for (int k = 0; k < 6; ++k) widths[k] = nf * ladder[k];
    return widths;
  }
  for (int k = 0; k < n_gn_layers; ++k)
    widths[k] = nf * (1 << std::min(k, n_gn_layers - 1 - k));
  return widths;
}

nlohmann::json TGNetConfig::to_json() const {
  return {{"t_demand", t_demand},
          {"t_dropoff", t_dropoff},
          {"n_gn_layers", n_gn_layers},
          {"nf", nf},
          {"width_ratios", width_ratios},
          {"tge_dim", tge_dim},
          {"dropoff_layers", dropoff_layers},
          {"dropoff_width", dropoff_width},
          {"head_width", head_width},
          {"dropout_p", dropout_p},
          {"use_tge", use_tge},
          {"use_dropoff", use_dropoff},
          {"use_pooling", use_pooling},
          {"aggregator", aggregator_name(aggregator)},
          {"bn_momentum", bn_momentum},
          {"bn_eps", bn_eps},
          {"key_dim", key_dim}};
}

TGNetConfig TGNetConfig::from_json(const nlohmann::json& j) {
  TGNetConfig c;
  c.t_demand = j.value("t_demand", c.t_demand);
  c.t_dropoff = j.value("t_dropoff", c.t_dropoff);
  c.n_gn_layers = j.value("n_gn_layers", c.n_gn_layers);
  c.nf = j.value("nf", c.nf);
  c.width_ratios = j.value("width_ratios", c.width_ratios);
  c.tge_dim = j.value("tge_dim", c.tge_dim);
  c.dropoff_layers = j.value("dropoff_layers", c.dropoff_layers);
  c.dropoff_width = j.value("dropoff_width", c.dropoff_width);
  c.head_width = j.value("head_width", c.head_width);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.use_tge = j.value("use_tge", c.use_tge);
  c.use_dropoff = j.value("use_dropoff", c.use_dropoff);
  c.use_pooling = j.value("use_pooling", c.use_pooling);
  if (j.contains("aggregator"))
    c.aggregator = aggregator_from_name(j.at("aggregator").get<std::string>());
  c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  c.bn_eps = j.value("bn_eps", c.bn_eps);
  c.key_dim = j.value("key_dim", c.key_dim);
  c.validate();
  return c;
}

Tensor TGNetModel::glorot(std::size_t fan_out, std::size_t fan_in,
                          std::vector<std::size_t> shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

void TGNetModel::add_gn_layer_params(const std::string& prefix, int in_width,
                                     int out_width, Rng& rng) {
  const std::size_t fi = static_cast<std::size_t>(in_width);
  const std::size_t fo = static_cast<std::size_t>(out_width);
  if (cfg_.aggregator == Aggregator::kMean) {
    params_.add(prefix + ".w_nbr", glorot(fo, fi, {fo, fi}, rng));
  } else {
    params_.add(prefix + ".k_nbr", glorot(9 * fo, 9 * fi, {fo, fi, 3, 3}, rng));
  }
  params_.add(prefix + ".w_self", glorot(fo, fi, {fo, fi}, rng));
  params_.add(prefix + ".w_comb", glorot(fo, fi + fo, {fo, fi + fo}, rng));
  params_.add(prefix + ".b_comb", Tensor{std::size_t{1}, fo});
  Tensor gamma{std::size_t{1}, fo};
  gamma.fill(1.0);
  params_.add(prefix + ".bn_gamma", std::move(gamma));
  params_.add(prefix + ".bn_beta", Tensor{std::size_t{1}, fo});
  params_.add(prefix + ".bn_mean", Tensor{std::size_t{1}, fo},
              /*trainable=*/false);
  Tensor var{std::size_t{1}, fo};
  var.fill(1.0);
  params_.add(prefix + ".bn_var", std::move(var), /*trainable=*/false);
}

TGNetModel::TGNetModel(const TGNetConfig& cfg, int grid_rows, int grid_cols,
                       std::uint64_t init_seed)
    : cfg_(cfg), rows_(grid_rows), cols_(grid_cols) {
  cfg_.validate();
  if (rows_ < 1 || cols_ < 1) throw ConfigError("grid dims must be >= 1");
  fine_ = build_lattice_graph(rows_, cols_);
  coarse_ = build_lattice_graph(kernels::pooled_dim(rows_),
                                kernels::pooled_dim(cols_));

  Rng rng(Rng::mix(init_seed, 0x7067656e5f696e69ULL));
  const std::vector<int> widths = cfg_.gn_widths();
  const int K = cfg_.n_gn_layers;

  if (cfg_.use_tge) {
    const std::size_t kd = static_cast<std::size_t>(cfg_.key_dim);
    const std::size_t td = static_cast<std::size_t>(cfg_.tge_dim);
    // A calendar key activates ~3 bits at once, so a plain fan-based init
    // makes the embedding dwarf the scaled demand features it is
    // concatenated with; shrink it to keep the input branches comparable.
    Tensor tge_w = glorot(td, kd, {td, kd}, rng);
    for (double& v : tge_w.data) v *= 0.25;
    params_.add("tge.weight", std::move(tge_w));
    params_.add("tge.bias", Tensor{std::size_t{1}, td});
  }

  int in_width = cfg_.t_demand + (cfg_.use_tge ? cfg_.tge_dim : 0);
  for (int k = 0; k < K; ++k) {
    int layer_in = in_width;
    if (cfg_.use_pooling && k == K - 1)
      layer_in = widths[K - 2] + widths[0];  // unpooled stack + skip concat
    add_gn_layer_params("gn" + std::to_string(k), layer_in, widths[k], rng);
    in_width = widths[k];
  }

  if (cfg_.use_dropoff) {
    int q_in = cfg_.t_dropoff;
    for (int d = 0; d < cfg_.dropoff_layers; ++d) {
      add_gn_layer_params("drop" + std::to_string(d), q_in, cfg_.dropoff_width,
                          rng);
      q_in = cfg_.dropoff_width;
    }
  }

  const std::size_t head_in = static_cast<std::size_t>(
      widths[K - 1] + (cfg_.use_dropoff ? cfg_.dropoff_width : 0));
  const std::size_t hw = static_cast<std::size_t>(cfg_.head_width_or_default());
  params_.add("head.weight", glorot(hw, head_in, {hw, head_in}, rng));
  // Small positive head biases keep the double-ReLU output alive at init;
  // zero init deadlocks nodes whose preactivation starts negative.
  Tensor head_bias{std::size_t{1}, hw};
  head_bias.fill(0.01);
  params_.add("head.bias", std::move(head_bias));
  params_.add("out.weight", glorot(1, hw, {std::size_t{1}, hw}, rng));
  Tensor out_bias{std::size_t{1}, std::size_t{1}};
  out_bias.fill(0.1);
  params_.add("out.bias", std::move(out_bias));
}

ad::Id TGNetModel::param_leaf(ad::Tape& tape, const std::string& name) {
  auto it = last_leaves_.find(name);
  if (it != last_leaves_.end()) return it->second;
  const ad::Id id = tape.leaf(params_.get(name), params_.trainable(name));
  last_leaves_[name] = id;
  return id;
}

ad::Id TGNetModel::gn_layer(ad::Tape& tape, ad::Id x, const std::string& prefix,
                            const RegionGraph* graph, int batch, int rows,
                            int cols, ad::Mode mode, Rng* rng) {
  ad::Id h_nbr;
  if (cfg_.aggregator == Aggregator::kMean) {
    h_nbr = tape.neighbor_mean(tape.dense(x, param_leaf(tape, prefix + ".w_nbr")),
                               graph, batch);
  } else {
    h_nbr = tape.conv3x3(x, param_leaf(tape, prefix + ".k_nbr"), batch, rows,
                         cols);
  }
  const ad::Id h_self = tape.dense(x, param_leaf(tape, prefix + ".w_self"));
  const ad::Id h = tape.add(h_nbr, h_self);
  ad::Id z = tape.concat_cols(x, h);
  z = tape.dense(z, param_leaf(tape, prefix + ".w_comb"),
                 param_leaf(tape, prefix + ".b_comb"));
  z = tape.batch_norm(z, param_leaf(tape, prefix + ".bn_gamma"),
                      param_leaf(tape, prefix + ".bn_beta"),
                      &params_.get(prefix + ".bn_mean"),
                      &params_.get(prefix + ".bn_var"), mode, cfg_.bn_momentum,
                      cfg_.bn_eps);
  z = tape.relu(z);
  return tape.dropout(z, cfg_.dropout_p, mode, rng);
}

ad::Id TGNetModel::build_forward(ad::Tape& tape, const BatchInputs& in,
                                 ad::Mode mode, Rng* dropout_rng) {
  const int n = n_nodes();
  const int b = in.batch;
  if (b < 1) throw ConfigError("empty batch");
  if (in.demand.rows() != static_cast<std::size_t>(b) * n ||
      in.demand.cols() != static_cast<std::size_t>(cfg_.t_demand))
    throw ConfigError("demand window shape does not match model config");
  if (cfg_.use_tge && (in.keys.rows() != static_cast<std::size_t>(b) ||
                       in.keys.cols() != static_cast<std::size_t>(cfg_.key_dim)))
    throw ConfigError("temporal key shape does not match model config");
  if (cfg_.use_dropoff &&
      (in.dropoff.rows() != static_cast<std::size_t>(b) * n ||
       in.dropoff.cols() != static_cast<std::size_t>(cfg_.t_dropoff)))
    throw ConfigError("dropoff window missing or mis-shaped while the "
                      "dropoff branch is enabled");

  last_leaves_.clear();
  const int K = cfg_.n_gn_layers;
  const int cr = kernels::pooled_dim(rows_);
  const int cc = kernels::pooled_dim(cols_);

  ad::Id x = tape.leaf(in.demand, false);
  if (cfg_.use_tge) {
    const ad::Id tau = tape.leaf(in.keys, false);
    const ad::Id tge = tape.dense(tau, param_leaf(tape, "tge.weight"),
                                  param_leaf(tape, "tge.bias"));
    x = tape.concat_broadcast(x, tge, n);
  }

  x = gn_layer(tape, x, "gn0", &fine_, b, rows_, cols_, mode, dropout_rng);
  if (cfg_.use_pooling) {
    const ad::Id skip = x;
    x = tape.avg_pool_grid(x, b, rows_, cols_);
    for (int k = 1; k < K - 1; ++k)
      x = gn_layer(tape, x, "gn" + std::to_string(k), &coarse_, b, cr, cc,
                   mode, dropout_rng);
    x = tape.nearest_unpool(x, b, rows_, cols_);
    x = tape.concat_cols(x, skip);
    x = gn_layer(tape, x, "gn" + std::to_string(K - 1), &fine_, b, rows_,
                 cols_, mode, dropout_rng);
  } else {
    for (int k = 1; k < K; ++k)
      x = gn_layer(tape, x, "gn" + std::to_string(k), &fine_, b, rows_, cols_,
                   mode, dropout_rng);
  }

  if (cfg_.use_dropoff) {
    ad::Id q = tape.leaf(in.dropoff, false);
    for (int d = 0; d < cfg_.dropoff_layers; ++d)
      q = gn_layer(tape, q, "drop" + std::to_string(d), &fine_, b, rows_,
                   cols_, mode, dropout_rng);
    x = tape.concat_cols(x, q);
  }

  ad::Id h = tape.relu(tape.dense(x, param_leaf(tape, "head.weight"),
                                  param_leaf(tape, "head.bias")));
  return tape.relu(tape.dense(h, param_leaf(tape, "out.weight"),
                              param_leaf(tape, "out.bias")));
}

Tensor TGNetModel::predict_raw(const BatchInputs& in) {
  ad::Tape tape;
  const ad::Id pred = build_forward(tape, in, ad::Mode::kEval, nullptr);
  Tensor out = tape.val(pred);
  for (double& v : out.data) v = demand_scale.invert(v);
  return out;
}

std::vector<double> TGNetModel::tge_vector(const TemporalKey& key) const {
  if (!cfg_.use_tge)
    throw ConfigError("model was built without the temporal embedding");
  if (key.dim() != cfg_.key_dim)
    throw ConfigError("temporal key dim does not match model config");
  const Tensor& w = params_.get("tge.weight");
  const Tensor& bias = params_.get("tge.bias");
  std::vector<double> out(static_cast<std::size_t>(cfg_.tge_dim));
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = bias.data[o];
    for (int i = 0; i < key.dim(); ++i)
      if (key.bits[i]) acc += w.at(o, static_cast<std::size_t>(i));
    out[o] = acc;
  }
  return out;
}

std::unordered_map<std::string, Tensor> TGNetModel::collect_grads(
    const ad::Tape& tape) const {
  std::unordered_map<std::string, Tensor> grads;
  for (const auto& [name, id] : last_leaves_) {
    if (!params_.trainable(name)) continue;
    const Tensor& g = tape.grad(id);
    if (g.size() == 0) continue;  // backward not run through this leaf
    grads.emplace(name, g);
  }
  return grads;
}

void TGNetModel::save(const std::string& path) const {
  nlohmann::json config = {
      {"model", cfg_.to_json()},
      {"grid_rows", rows_},
      {"grid_cols", cols_},
      {"demand_scale", demand_scale.max_value},
      {"dropoff_scale", dropoff_scale.max_value},
  };
  ParamStore::write_checkpoint(path, params_, config);
}

TGNetModel TGNetModel::load(const std::string& path) {
  const nlohmann::json config = ParamStore::peek_config(path);
  if (!config.contains("model"))
    throw DataError("checkpoint has no model config block: " + path);
  TGNetModel model(TGNetConfig::from_json(config.at("model")),
                   config.at("grid_rows").get<int>(),
                   config.at("grid_cols").get<int>(), /*init_seed=*/0);
  ParamStore::read_checkpoint(path, model.params_);
  model.demand_scale.max_value = config.value("demand_scale", 1.0);
  model.dropoff_scale.max_value = config.value("dropoff_scale", 1.0);
  return model;
}

}  // namespace tgnet
