#include "tgnet/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tgnet/error.hpp"

namespace tgnet {

Tensor& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (has(name)) throw ConfigError("duplicate parameter: " + name);
  Entry e;
  e.name = name;
  e.trainable = trainable;
  if (trainable) {
    e.m = Tensor(init.shape);
    e.v = Tensor(init.shape);
  }
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  index_[name] = entries_.size() - 1;
  return entries_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].value;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].trainable;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParamStore::trainable_scalar_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_)
    if (e.trainable) n += e.value.size();
  return n;
}

void ParamStore::adam_step(
    const std::unordered_map<std::string, Tensor>& grads,
    const AdamConfig& cfg) {
  const double lr = cfg.lr_at(global_step_);
  ++global_step_;
  for (Entry& e : entries_) {
    if (!e.trainable) continue;
    ++e.step;
    const auto it = grads.find(e.name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    if (g && !g->same_shape(e.value))
      throw ConfigError("gradient shape mismatch for " + e.name);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double gi = g ? g->data[i] : 0.0;
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * gi;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = e.m.data[i] / bc1;
      const double vhat = e.v.data[i] / bc2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (!std::isfinite(e.value.data[i]))
        throw NumericError("non-finite parameter after adam step: " + e.name);
    }
  }
}

std::vector<Tensor> ParamStore::snapshot_values() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.value);
  return out;
}

void ParamStore::restore_values(const std::vector<Tensor>& values) {
  if (values.size() != entries_.size())
    throw ConfigError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(entries_[i].value))
      throw ConfigError("snapshot shape mismatch for " + entries_[i].name);
    entries_[i].value = values[i];
  }
}

nlohmann::json ParamStore::manifest() const {
  nlohmann::json params = nlohmann::json::array();
  for (const Entry& e : entries_) {
    params.push_back({{"name", e.name},
                      {"shape", e.value.shape},
                      {"trainable", e.trainable}});
  }
  return {{"format", 1}, {"adam_step", global_step_}, {"params", params}};
}

namespace {

void write_f64_le(std::ofstream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw DataError("truncated checkpoint: " + path);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i)
    b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated checkpoint: " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

nlohmann::json read_manifest(std::ifstream& in, const std::string& path) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, "TGCK1", 5) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint32_t len = read_u32_le(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), len))
    throw DataError("truncated checkpoint manifest: " + path);
  try {
    return nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw DataError("bad checkpoint manifest in " + path + ": " + e.what());
  }
}

}  // namespace

void ParamStore::write_checkpoint(const std::string& path,
                                  const ParamStore& store,
                                  const nlohmann::json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  nlohmann::json manifest = store.manifest();
  manifest["config"] = config;
  const std::string text = manifest.dump();
  out.write("TGCK1", 5);
  write_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Entry& e : store.entries_)
    for (double v : e.value.data) write_f64_le(out, v);
  if (!out) throw DataError("failed writing " + path);
}

nlohmann::json ParamStore::read_checkpoint(const std::string& path,
                                           ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file: " + path);
  const nlohmann::json manifest = read_manifest(in, path);
  const auto& params = manifest.at("params");
  if (params.size() != store.entries_.size())
    throw DataError("checkpoint parameter list does not match the model");
  for (const auto& p : params) {
    const std::string name = p.at("name").get<std::string>();
    Tensor& dst = store.get(name);
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    if (shape != dst.shape)
      throw DataError("checkpoint shape mismatch for " + name);
    for (double& v : dst.data) v = read_f64_le(in, path);
  }
  store.global_step_ = manifest.value("adam_step", std::int64_t{0});
  return manifest.value("config", nlohmann::json::object());
}

nlohmann::json ParamStore::peek_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file: " + path);
  const nlohmann::json manifest = read_manifest(in, path);
  return manifest.value("config", nlohmann::json::object());
}

}  // namespace tgnet
