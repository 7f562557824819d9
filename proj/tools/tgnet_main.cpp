#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "tgnet/commands.hpp"
#include "tgnet/error.hpp"

namespace {

tgnet::RunConfig load_config(const std::string& config_path,
                             std::optional<std::uint64_t> seed) {
  tgnet::RunConfig cfg = config_path.empty()
                             ? tgnet::RunConfig{}
                             : tgnet::RunConfig::from_file(config_path);
  if (seed) {
    cfg.train.seed = *seed;
    cfg.cli_seed = *seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TGNet spatiotemporal demand forecasting engine"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string checkpoint;
  int n_seeds = 5;

  app.add_option("--config", config_path, "run config JSON");
  app.add_option("--out-dir", out_dir, "directory for output files");
  app.add_option("--seed", seed, "override the run seed");

  CLI::App* ingest = app.add_subcommand("ingest", "rasterize a demand log CSV");
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--preset", preset,
                    "synth preset (nyc-taxi-like | context-events-small)");
  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint path override");
  CLI::App* export_tge =
      app.add_subcommand("export-tge", "dump temporal embedding vectors");
  export_tge->add_option("--checkpoint", checkpoint,
                         "checkpoint path override");
  CLI::App* repro =
      app.add_subcommand("repro", "train/eval across seeds and aggregate");
  repro->add_option("--n-seeds", n_seeds, "number of repeats");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    tgnet::RunConfig cfg = load_config(config_path, seed);
    if (!preset.empty()) cfg.preset = preset;
    if (!checkpoint.empty()) cfg.paths.checkpoint = checkpoint;
    if (ingest->parsed()) tgnet::cmd_ingest(cfg, out_dir);
    if (synth->parsed()) tgnet::cmd_synth(cfg, out_dir);
    if (train->parsed()) tgnet::cmd_train(cfg, out_dir);
    if (eval->parsed()) tgnet::cmd_eval(cfg, out_dir);
    if (export_tge->parsed()) tgnet::cmd_export_tge(cfg, out_dir);
    if (repro->parsed()) tgnet::cmd_repro(cfg, out_dir, n_seeds);
    return 0;
  } catch (const tgnet::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const tgnet::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const tgnet::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
