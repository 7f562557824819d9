#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "tgnet/run_config.hpp"
#include "tgnet/synthgen.hpp"

using namespace tgnet;
namespace fs = std::filesystem;

namespace {

int run_cmd(const std::string& args, const std::string& capture = "") {
  std::string cmd = std::string(TGNET_BIN) + " " + args;
  if (!capture.empty()) cmd += " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig cli_test_config() {
  RunConfig cfg;
  SynthConfig synth = SynthConfig::context_events_small(4);
  synth.n_days = 6;
  synth.events.resize(6);
  cfg.synth_inline = synth.to_json();
  cfg.grid = synth.grid_spec();
  cfg.model.t_demand = 4;
  cfg.model.t_dropoff = 6;
  cfg.model.n_gn_layers = 2;
  cfg.model.nf = 4;
  cfg.model.width_ratios = {1, 1};
  cfg.model.tge_dim = 4;
  cfg.model.dropoff_layers = 1;
  cfg.model.dropoff_width = 4;
  cfg.model.head_width = 8;
  cfg.model.bn_momentum = 0.9;
  cfg.train.max_epochs = 4;
  cfg.train.patience = -1;
  cfg.train.batch_size = 32;
  cfg.train.lr0 = 0.005;
  cfg.train.seed = 9;
  cfg.eval.k = 11.0;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  std::string file(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("missing input files exit nonzero and name the path") {
  TempDir dir("tgnet_cli_missing");
  const std::string err = dir.file("err.txt");
  CHECK(run_cmd("eval --config /nonexistent/cfg.json", err) == 3);
  CHECK(slurp(err).find("/nonexistent/cfg.json") != std::string::npos);

  RunConfig cfg = cli_test_config();
  cfg.paths.pickup_tensor = dir.file("missing.stgd");
  cfg.paths.dropoff_tensor = dir.file("missing2.stgd");
  const std::string cfg_path = dir.file("cfg.json");
  cfg.save(cfg_path);
  CHECK(run_cmd("train --config " + cfg_path, err) == 3);
  CHECK(slurp(err).find("missing.stgd") != std::string::npos);
}

TEST_CASE("bad config version and malformed settings exit 2") {
  TempDir dir("tgnet_cli_badcfg");
  {
    std::ofstream out(dir.file("bad.json"));
    out << "{\"config_version\": 99}\n";
  }
  CHECK(run_cmd("train --config " + dir.file("bad.json"),
                dir.file("err.txt")) == 2);
  CHECK(run_cmd("synth", dir.file("err2.txt")) == 2);  // no synth source
}

TEST_CASE("synth -> train -> eval -> export-tge -> repro round trip") {
  TempDir dir("tgnet_cli_chain");
  RunConfig cfg = cli_test_config();
  const std::string cfg_path = dir.file("cfg.json");
  cfg.save(cfg_path);

  const std::string out = dir.file("out.txt");
  REQUIRE(run_cmd("synth --config " + cfg_path + " --out-dir " + dir.file("data"),
                  out) == 0);
  const std::string chained = dir.file("data/run_config.json");
  REQUIRE(fs::exists(chained));
  REQUIRE(fs::exists(dir.file("data/pickup.stgd")));
  REQUIRE(fs::exists(dir.file("data/logs.csv")));
  REQUIRE(fs::exists(dir.file("data/labels.json")));
  REQUIRE(fs::exists(dir.file("data/holidays.txt")));

  REQUIRE(run_cmd("train --config " + chained + " --out-dir " + dir.file("run"),
                  out) == 0);
  REQUIRE(fs::exists(dir.file("run/model.tgck")));
  REQUIRE(fs::exists(dir.file("run/history.csv")));

  RunConfig eval_cfg = RunConfig::from_file(chained);
  eval_cfg.paths.checkpoint = dir.file("run/model.tgck");
  eval_cfg.save(dir.file("eval_cfg.json"));
  REQUIRE(run_cmd("eval --config " + dir.file("eval_cfg.json") + " --out-dir " +
                      dir.file("run"),
                  out) == 0);
  const std::string report_path = dir.file("run/report.json");
  REQUIRE(fs::exists(report_path));
  const nlohmann::json report = nlohmann::json::parse(slurp(report_path));
  CHECK(report.at("k").get<double>() == 11.0);
  CHECK(report.at("overall").contains("model"));
  CHECK(report.at("overall").contains("persistence"));
  CHECK(report.at("overall").contains("historical_average"));
  CHECK(report.at("atypical").contains("top_1pct"));
  CHECK(report.at("atypical").contains("top_5pct"));

  REQUIRE(run_cmd("export-tge --config " + dir.file("eval_cfg.json") +
                      " --out-dir " + dir.file("run"),
                  out) == 0);
  const std::string tge = slurp(dir.file("run/tge_vectors.csv"));
  CHECK(tge.substr(0, 36) == "slot,day_of_week,holiday,before_holi");
  // 48 slots x 7 days x holiday bit, plus the header line
  CHECK(std::count(tge.begin(), tge.end(), '\n') == 48 * 7 * 2 + 1);

  REQUIRE(run_cmd("repro --config " + chained + " --n-seeds 2 --out-dir " +
                      dir.file("repro_a"),
                  out) == 0);
  REQUIRE(run_cmd("repro --config " + chained + " --n-seeds 2 --out-dir " +
                      dir.file("repro_b"),
                  out) == 0);
  const std::string a = slurp(dir.file("repro_a/repro.json"));
  const std::string b = slurp(dir.file("repro_b/repro.json"));
  REQUIRE(!a.empty());
  CHECK(a == b);  // same master seed, byte-identical aggregate
  const nlohmann::json agg = nlohmann::json::parse(a);
  CHECK(agg.at("n_seeds").get<int>() == 2);
  CHECK(agg.at("rmse").at("values").size() == 2);
}

TEST_CASE("synth output is byte-identical across reruns with one seed") {
  TempDir dir("tgnet_cli_det");
  RunConfig cfg = cli_test_config();
  const std::string cfg_path = dir.file("cfg.json");
  cfg.save(cfg_path);
  REQUIRE(run_cmd("synth --config " + cfg_path + " --out-dir " + dir.file("a"),
                  dir.file("log.txt")) == 0);
  REQUIRE(run_cmd("synth --config " + cfg_path + " --out-dir " + dir.file("b"),
                  dir.file("log.txt")) == 0);
  CHECK(slurp(dir.file("a/pickup.stgd")) == slurp(dir.file("b/pickup.stgd")));
  CHECK(slurp(dir.file("a/dropoff.stgd")) == slurp(dir.file("b/dropoff.stgd")));
  CHECK(slurp(dir.file("a/logs.csv")) == slurp(dir.file("b/logs.csv")));

  // --seed overrides the dataset seed
  REQUIRE(run_cmd("synth --config " + cfg_path + " --seed 123 --out-dir " +
                      dir.file("c"),
                  dir.file("log.txt")) == 0);
  CHECK(slurp(dir.file("a/pickup.stgd")) != slurp(dir.file("c/pickup.stgd")));
}
