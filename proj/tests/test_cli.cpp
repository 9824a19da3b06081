#include <catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pam/ablations.hpp"

using namespace pam;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("pam_cli_" + std::to_string(::getpid()) + "_" +
                                                std::to_string(counter()++))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out_file = dir.sub("cli_stdout.txt");
  const std::string err_file = dir.sub("cli_stderr.txt");
  const std::string cmd = std::string(PAM_CLI_PATH) + " " + args + " > " + out_file + " 2> " + err_file;
  const int raw = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(raw);
  result.out = read_text_file(out_file);
  result.err = read_text_file(err_file);
  return result;
}

std::string micro_world_config() { return std::string(PAM_SOURCE_DIR) + "/configs/micro/world.toml"; }
std::string micro_train_config() { return std::string(PAM_SOURCE_DIR) + "/configs/micro/train.toml"; }
std::string micro_eval_config() { return std::string(PAM_SOURCE_DIR) + "/configs/micro/eval.toml"; }

// minimal structural validator for the shipped JSON schema (required keys,
// primitive types, additionalProperties recursion)
bool validate_schema(const Json& schema, const Json& value, std::string& error, const std::string& where = "$") {
  if (schema.contains("type")) {
    const std::string type = schema["type"].get<std::string>();
    const bool ok = (type == "object" && value.is_object()) || (type == "integer" && value.is_number_integer()) ||
                    (type == "number" && value.is_number()) || (type == "string" && value.is_string()) ||
                    (type == "boolean" && value.is_boolean()) || (type == "array" && value.is_array());
    if (!ok) {
      error = where + ": expected " + type + ", got " + value.type_name();
      return false;
    }
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"]) {
      if (!value.contains(key.get<std::string>())) {
        error = where + ": missing required key '" + key.get<std::string>() + "'";
        return false;
      }
    }
  if (schema.contains("properties"))
    for (const auto& [key, sub_schema] : schema["properties"].items())
      if (value.contains(key) && !validate_schema(sub_schema, value[key], error, where + "." + key)) return false;
  if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object())
    for (const auto& [key, sub_value] : value.items()) {
      if (schema.contains("properties") && schema["properties"].contains(key)) continue;
      if (!validate_schema(schema["additionalProperties"], sub_value, error, where + "." + key)) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("gen-world produces a deterministic world file and sidecar") {
  TempDir dir;
  const auto first = run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  CAPTURE(first.err);
  REQUIRE(first.exit_code == 0);
  REQUIRE(fs::exists(dir.sub("w.pamw")));
  REQUIRE(fs::exists(dir.sub("w.pamw.json")));

  // the sidecar mirrors the config
  const Json sidecar = Json::parse(read_text_file(dir.sub("w.pamw.json")));
  REQUIRE(sidecar["n_rooms"] == 4);
  REQUIRE(sidecar["seed"] == 42);

  const auto second = run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w2.pamw"));
  REQUIRE(second.exit_code == 0);
  REQUIRE(fnv1a64_file(dir.sub("w.pamw")) == fnv1a64_file(dir.sub("w2.pamw")));

  // refuses to overwrite without --force
  const auto clobber = run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  REQUIRE(clobber.exit_code == 2);
  const auto forced =
      run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw") + " --force");
  REQUIRE(forced.exit_code == 0);
}

TEST_CASE("gen-world names the missing config field and exits 2") {
  TempDir dir;
  write_text_file(dir.sub("bad.toml"), "embed_dim = 8\nn_rooms = 2\n");
  const auto result = run_cli(dir, "gen-world --config " + dir.sub("bad.toml") + " --out " + dir.sub("w.pamw"));
  REQUIRE(result.exit_code == 2);
  REQUIRE(result.err.find("room_scale") != std::string::npos);
}

TEST_CASE("the seed flag overrides the config seed") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("a.pamw"));
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("b.pamw") + " --seed 7");
  REQUIRE(fnv1a64_file(dir.sub("a.pamw")) != fnv1a64_file(dir.sub("b.pamw")));
  const Json sidecar = Json::parse(read_text_file(dir.sub("b.pamw.json")));
  REQUIRE(sidecar["seed"] == 7);
}

TEST_CASE("train writes a checkpoint, report, and loss curve; force guards overwrite") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  const auto trained = run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() +
                                        " --out " + dir.sub("m.pamm"));
  CAPTURE(trained.err);
  REQUIRE(trained.exit_code == 0);
  REQUIRE(fs::exists(dir.sub("m.pamm")));
  REQUIRE(fs::exists(dir.sub("m.pamm.report.json")));
  REQUIRE(fs::exists(dir.sub("m.pamm.loss.csv")));
  const Json report = Json::parse(read_text_file(dir.sub("m.pamm.report.json")));
  REQUIRE(report["model"] == "predictor");
  REQUIRE(report["epoch_loss"].size() == 8);

  const auto refused = run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() +
                                        " --out " + dir.sub("m.pamm"));
  REQUIRE(refused.exit_code == 2);
  REQUIRE(refused.err.find("--force") != std::string::npos);
  const auto forced = run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() +
                                       " --out " + dir.sub("m.pamm") + " --force");
  REQUIRE(forced.exit_code == 0);
}

TEST_CASE("training results are identical for any thread count") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() + " --out " +
                   dir.sub("t1.pamm") + " --threads 1");
  run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() + " --out " +
                   dir.sub("t2.pamm") + " --threads 2");
  REQUIRE(fnv1a64_file(dir.sub("t1.pamm")) == fnv1a64_file(dir.sub("t2.pamm")));
}

TEST_CASE("a non-finite training failure exits with code 3") {
  TempDir dir;
  WorldConfig c;
  c.embed_dim = 8;
  c.n_rooms = 2;
  c.n_objects = 4;
  c.objects_per_room = 2;
  c.n_shared_objects = 0;
  c.n_trajectories = 2;
  c.trajectory_len = 8;
  World world = gen_world(c);
  world.embeddings(3, 0) = std::numeric_limits<double>::infinity();
  save_world(world, dir.sub("broken.pamw"));
  write_text_file(dir.sub("train.toml"),
                  "tau = 2\nepochs = 2\nbatch_size = 4\nn_pairs = 16\nhidden_dim = 8\n");
  const auto result = run_cli(dir, "train --world " + dir.sub("broken.pamw") + " --config " + dir.sub("train.toml") +
                                       " --out " + dir.sub("m.pamm"));
  REQUIRE(result.exit_code == 3);
  REQUIRE(result.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("eval emits schema-valid metrics with all three methods") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() + " --out " +
                   dir.sub("m.pamm"));
  // bilinear checkpoint via the model switch
  write_text_file(dir.sub("train_bil.toml"),
                  "tau = 3\nmodel = bilinear\nepochs = 4\nbatch_size = 32\nn_pairs = 128\nhidden_dim = 32\n");
  const auto bil = run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + dir.sub("train_bil.toml") +
                                    " --out " + dir.sub("b.pamb"));
  REQUIRE(bil.exit_code == 0);

  const auto result = run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() +
                                       " --predictor " + dir.sub("m.pamm") + " --bilinear " + dir.sub("b.pamb") +
                                       " --out " + dir.sub("evaldir") + " --graph-csv");
  CAPTURE(result.err);
  REQUIRE(result.exit_code == 0);

  const Json metrics = Json::parse(read_text_file(dir.sub("evaldir") + "/metrics.json"));
  const Json schema = Json::parse(read_text_file(std::string(PAM_SOURCE_DIR) + "/docs/metrics.schema.json"));
  std::string error;
  const bool valid = validate_schema(schema, metrics, error);
  CAPTURE(error);
  REQUIRE(valid);
  REQUIRE(metrics["methods"].size() == 3);
  for (const std::string method : {"predictor", "cosine", "bilinear"})
    REQUIRE(metrics["methods"].contains(method));

  const std::string csv = read_text_file(dir.sub("evaldir") + "/metrics.csv");
  REQUIRE(csv.rfind("metric,predictor,cosine,bilinear", 0) == 0);
  REQUIRE(fs::exists(dir.sub("evaldir") + "/graph.csv"));
  REQUIRE(fs::exists(dir.sub("evaldir") + "/manifest.json"));
}

TEST_CASE("ablate rejects unknown experiment names with the valid list") {
  TempDir dir;
  write_text_file(dir.sub("spec.json"), "{}");
  const auto result =
      run_cli(dir, "ablate --name galaxy_brain --spec " + dir.sub("spec.json") + " --out " + dir.sub("run"));
  REQUIRE(result.exit_code == 2);
  REQUIRE(result.err.find("galaxy_brain") != std::string::npos);
  REQUIRE(result.err.find("bridging_oracle") != std::string::npos);
  REQUIRE(result.err.find("arch_sweep") != std::string::npos);
}

TEST_CASE("ablate reruns reproduce byte-identical metrics") {
  TempDir dir;
  ExperimentSpec spec;
  spec.name = "bridging_oracle";
  spec.world.embed_dim = 16;
  spec.world.n_rooms = 4;
  spec.world.n_objects = 8;
  spec.world.objects_per_room = 2;
  spec.world.n_shared_objects = 2;
  spec.world.n_trajectories = 10;
  spec.world.trajectory_len = 20;
  spec.world.room_dwell_mean = 4;
  spec.tau = 3;
  spec.train.epochs = 4;
  spec.train.batch_size = 16;
  spec.train.n_pairs = 64;
  spec.train.hidden_dim = 16;
  spec.train_seeds = {42};
  write_text_file(dir.sub("spec.json"), to_json(spec).dump(2));

  const auto a = run_cli(dir, "ablate --name bridging_oracle --spec " + dir.sub("spec.json") + " --out " +
                                  dir.sub("run_a"));
  CAPTURE(a.err);
  REQUIRE(a.exit_code == 0);
  const auto b = run_cli(dir, "ablate --name bridging_oracle --spec " + dir.sub("spec.json") + " --out " +
                                  dir.sub("run_b"));
  REQUIRE(b.exit_code == 0);
  REQUIRE(read_text_file(dir.sub("run_a") + "/metrics.json") == read_text_file(dir.sub("run_b") + "/metrics.json"));
  const Json metrics = Json::parse(read_text_file(dir.sub("run_a") + "/metrics.json"));
  REQUIRE(metrics["cross_trajectory_edges"] == 0);
  REQUIRE(metrics["oracle_reach_rate"] == 0.0);
}

TEST_CASE("report consolidates runs, formats mean and SD, and refuses world mismatches") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() + " --out " +
                   dir.sub("m1.pamm"));
  run_cli(dir, "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config() + " --out " +
                   dir.sub("m2.pamm") + " --seed 123");
  run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() + " --predictor " +
                   dir.sub("m1.pamm") + " --out " + dir.sub("eval1"));
  run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() + " --predictor " +
                   dir.sub("m2.pamm") + " --out " + dir.sub("eval2"));

  const auto multi = run_cli(dir, "report " + dir.sub("eval1") + " " + dir.sub("eval2") + " --out " + dir.sub("rep"));
  CAPTURE(multi.err);
  REQUIRE(multi.exit_code == 0);
  const std::string md = read_text_file(dir.sub("rep") + "/report.md");
  REQUIRE(md.find("±") != std::string::npos);  // two samples -> mean ± SD
  const std::string csv = read_text_file(dir.sub("rep") + "/report.csv");
  REQUIRE(csv.find("predictor_mean,predictor_sd") != std::string::npos);

  // single run: the SD column stays empty
  const auto single = run_cli(dir, "report " + dir.sub("eval1") + " --out " + dir.sub("rep_single"));
  REQUIRE(single.exit_code == 0);
  const std::string md_single = read_text_file(dir.sub("rep_single") + "/report.md");
  REQUIRE(md_single.find("±") == std::string::npos);

  // a run over a different world is refused with a diagnostic
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("other.pamw") + " --seed 99");
  run_cli(dir, "eval --world " + dir.sub("other.pamw") + " --config " + micro_eval_config() + " --out " +
                   dir.sub("eval_other"));
  const auto mismatch =
      run_cli(dir, "report " + dir.sub("eval1") + " " + dir.sub("eval_other") + " --out " + dir.sub("rep_bad"));
  REQUIRE(mismatch.exit_code == 2);
  REQUIRE(mismatch.err.find("world_hash") != std::string::npos);
}

TEST_CASE("shipped default configs carry the reference values") {
  const KeyValueFile world = KeyValueFile::parse_file(std::string(PAM_SOURCE_DIR) + "/configs/paper/world.toml");
  REQUIRE(world.get_int("n_rooms") == 20);
  REQUIRE(world.get_int("embed_dim") == 128);
  REQUIRE(world.get_int("n_objects") == 50);
  REQUIRE(world.get_int("n_trajectories") == 500);
  REQUIRE(world.get_int("trajectory_len") == 100);
  const KeyValueFile train = KeyValueFile::parse_file(std::string(PAM_SOURCE_DIR) + "/configs/paper/train.toml");
  REQUIRE(train.get_int("tau") == 5);
  REQUIRE(train.get_int("epochs") == 500);
  REQUIRE(train.get_int("batch_size") == 512);
  REQUIRE(train.get_int("n_pairs") == 200000);
  REQUIRE(train.get_int("hidden_dim") == 1024);
  REQUIRE(train.get_double("lr_start") == 5e-4);
  REQUIRE(train.get_double("temp_start") == 0.15);
  const KeyValueFile eval_cfg = KeyValueFile::parse_file(std::string(PAM_SOURCE_DIR) + "/configs/paper/eval.toml");
  REQUIRE(eval_cfg.get_int("tau") == 5);
  REQUIRE(eval_cfg.get_int("n_queries_precision") == 500);
  REQUIRE(eval_cfg.get_int("auc_negative_cap") == 2000);

  // the reference predictor dims land on ~2.36M parameters
  const MlpParams params = init_params(static_cast<int>(world.get_int("embed_dim")),
                                       static_cast<int>(train.get_int("hidden_dim")),
                                       static_cast<int>(world.get_int("embed_dim")), 4, 1);
  REQUIRE(std::abs(static_cast<double>(params.param_count()) / 2.36e6 - 1.0) < 0.02);
}

TEST_CASE("the PAM_THREADS environment variable drives the default thread count") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  const std::string base_cmd = "train --world " + dir.sub("w.pamw") + " --config " + micro_train_config();
  run_cli(dir, base_cmd + " --out " + dir.sub("env1.pamm"));
  // prefix the env var through the shell
  const std::string out_file = dir.sub("cli_stdout.txt");
  const std::string err_file = dir.sub("cli_stderr.txt");
  const std::string cmd = std::string("PAM_THREADS=3 ") + PAM_CLI_PATH + " " + base_cmd + " --out " +
                          dir.sub("env3.pamm") + " > " + out_file + " 2> " + err_file;
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  REQUIRE(fnv1a64_file(dir.sub("env1.pamm")) == fnv1a64_file(dir.sub("env3.pamm")));
}

TEST_CASE("eval refuses to overwrite an existing metrics.json without force") {
  TempDir dir;
  run_cli(dir, "gen-world --config " + micro_world_config() + " --out " + dir.sub("w.pamw"));
  const auto first =
      run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() + " --out " + dir.sub("e"));
  REQUIRE(first.exit_code == 0);
  const auto second =
      run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() + " --out " + dir.sub("e"));
  REQUIRE(second.exit_code == 2);
  const auto forced = run_cli(dir, "eval --world " + dir.sub("w.pamw") + " --config " + micro_eval_config() +
                                       " --out " + dir.sub("e") + " --force");
  REQUIRE(forced.exit_code == 0);
}
