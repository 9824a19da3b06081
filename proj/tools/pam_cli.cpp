// Command-line surface for the association-recall benchmark pipeline:
// world generation, model training, metric evaluation, named ablation
// experiments, and multi-run report consolidation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pam/ablations.hpp"

namespace fs = std::filesystem;
using pam::Json;

namespace {

struct CommonArgs {
  int threads = pam::default_threads_from_env();
  bool force = false;
};

void add_threads_flag(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--threads", args.threads, "kernel thread count (results are identical for any value)")
      ->check(CLI::PositiveNumber);
}

int cmd_gen_world(const std::string& config_path, const std::string& out_path, bool force,
                  const std::optional<std::uint64_t>& seed_override) {
  pam::WorldConfig config = pam::load_world_config(config_path);
  if (seed_override) config.seed = *seed_override;
  pam::require_writable(out_path, force);
  const pam::World world = pam::gen_world(config);
  pam::save_world(world, out_path);
  // JSON sidecar mirrors the config for human inspection
  pam::write_text_file(out_path + ".json", pam::to_json(config).dump(2) + "\n");
  std::cout << "world: " << world.state_count() << " states, " << config.n_rooms << " rooms -> " << out_path
            << "\n";
  std::cout << "hash: " << pam::hex64(pam::fnv1a64_file(out_path)) << "\n";
  return 0;
}

int cmd_train(const std::string& world_path, const std::string& config_path, const std::string& out_path,
              bool force, const std::optional<std::uint64_t>& seed_override) {
  pam::require_writable(out_path, force);
  const pam::World world = pam::load_world(world_path);
  pam::TrainFileConfig file = pam::load_train_config(config_path);
  if (seed_override) {
    file.train.init_seed = *seed_override;
    file.train.pair_seed = *seed_override;
  }
  const pam::AssociationGraph graph = pam::build_graph(world, file.tau);
  if (file.holdout_fraction > 0.0)
    file.train.anchor_holdout = pam::holdout_anchors(world, file.holdout_fraction, file.holdout_seed);
  if (file.split_fraction > 0.0)
    file.train.edge_split = pam::split_edges(graph, file.split_fraction, file.split_seed);

  pam::TrainReport report;
  if (file.model == "predictor") {
    auto [params, train_report] = pam::train(world, graph, file.train);
    pam::save_predictor(params, pam::to_json(file.train).dump(), out_path);
    report = std::move(train_report);
  } else {
    auto [params, train_report] = pam::bilinear_train(world, graph, file.train);
    pam::save_bilinear(params, pam::to_json(file.train).dump(), out_path);
    report = std::move(train_report);
  }
  pam::write_text_file(out_path + ".report.json", pam::to_json(report).dump(2) + "\n");
  std::ostringstream loss_csv;
  loss_csv << "epoch,loss\n";
  loss_csv.precision(12);
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) loss_csv << e << "," << report.epoch_loss[e] << "\n";
  pam::write_text_file(out_path + ".loss.csv", loss_csv.str());
  std::cout << file.model << " trained: final loss " << report.final_loss << " in " << report.wall_seconds
            << " s -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& world_path, const std::string& config_path, const std::string& predictor_path,
             const std::string& bilinear_path, const std::string& out_dir, bool force, bool export_graph) {
  const pam::World world = pam::load_world(world_path);
  const pam::EvalFileConfig file = pam::load_eval_config(config_path);
  const pam::AssociationGraph graph = pam::build_graph(world, file.tau);

  std::vector<pam::Scorer> scorers;
  if (!predictor_path.empty()) {
    const pam::MlpParams params = pam::load_predictor(predictor_path);
    if (params.in_dim != world.config.embed_dim)
      throw pam::ConfigError("predictor checkpoint dimension does not match the world");
    scorers.push_back(pam::make_predictor_scorer(world, params));
  }
  scorers.push_back(pam::make_cosine_scorer(world));
  if (!bilinear_path.empty()) {
    const pam::BilinearParams params = pam::load_bilinear(bilinear_path);
    if (params.w.rows != world.config.embed_dim)
      throw pam::ConfigError("bilinear checkpoint dimension does not match the world");
    scorers.push_back(pam::make_bilinear_scorer(world, params));
  }

  if (!force && fs::exists(fs::path(out_dir) / "metrics.json"))
    throw pam::ConfigError("refusing to overwrite existing path '" + (fs::path(out_dir) / "metrics.json").string() +
                           "' (pass --force to allow)");
  fs::create_directories(out_dir);
  const pam::MetricsReport report = pam::evaluate_scorers(scorers, graph, file.eval);
  Json j = pam::to_json(report);
  j["world_hash"] = pam::hex64(pam::fnv1a64_file(world_path));
  pam::write_text_file((fs::path(out_dir) / "metrics.json").string(), j.dump(2) + "\n");
  pam::write_text_file((fs::path(out_dir) / "metrics.csv").string(), pam::metrics_report_csv(report));
  if (export_graph) pam::export_graph_csv(graph, (fs::path(out_dir) / "graph.csv").string());

  pam::RunManifest manifest;
  manifest.record_config("eval", pam::to_json(file.eval));
  manifest.seeds["query"] = file.eval.query_seed;
  manifest.output_files["metrics.json"] = pam::hex64(pam::fnv1a64_file((fs::path(out_dir) / "metrics.json").string()));
  manifest.output_files["metrics.csv"] = pam::hex64(pam::fnv1a64_file((fs::path(out_dir) / "metrics.csv").string()));
  if (export_graph)
    manifest.output_files["graph.csv"] = pam::hex64(pam::fnv1a64_file((fs::path(out_dir) / "graph.csv").string()));
  pam::write_manifest(out_dir, manifest);
  std::cout << "metrics written to " << out_dir << " (methods:";
  for (const auto& [name, _] : report.methods) std::cout << " " << name;
  std::cout << ")\n";
  return 0;
}

int cmd_ablate(const std::string& name, const std::string& spec_path, const std::string& out_dir, bool force) {
  Json spec_json = Json::parse(pam::read_text_file(spec_path));
  if (!spec_json.contains("experiment")) spec_json["experiment"] = name;
  pam::ExperimentSpec spec = pam::experiment_spec_from_json(spec_json);
  if (spec.name != name)
    throw pam::ConfigError("experiment name '" + name + "' does not match spec file ('" + spec.name + "')");
  if (!force && fs::exists(fs::path(out_dir) / "metrics.json"))
    throw pam::ConfigError("refusing to overwrite existing path '" + (fs::path(out_dir) / "metrics.json").string() +
                           "' (pass --force to allow)");
  pam::run_experiment(spec, out_dir);
  std::cout << "experiment '" << name << "' -> " << out_dir << "\n";
  return 0;
}

struct RunSamples {
  std::string world_hash;
  // method -> metric -> samples across seeds/runs
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
};

RunSamples read_run_dir(const std::string& dir) {
  RunSamples out;
  const Json metrics = Json::parse(pam::read_text_file((fs::path(dir) / "metrics.json").string()));
  if (metrics.contains("world_hash")) out.world_hash = metrics["world_hash"].get<std::string>();
  auto absorb_report = [&](const Json& report) {
    for (const auto& [method, m] : report["methods"].items()) {
      for (const auto& [k, v] : m["ap_at_k"].items()) out.samples[method]["ap@" + k].push_back(v.get<double>());
      for (const auto& [k, v] : m["cbr_at_k"].items()) out.samples[method]["cbr@" + k].push_back(v.get<double>());
      for (const auto& [k, v] : m["spec_at_k"].items()) out.samples[method]["spec@" + k].push_back(v.get<double>());
      out.samples[method]["auc_overall"].push_back(m["auc_overall"].get<double>());
      out.samples[method]["auc_cross_room"].push_back(m["auc_cross_room"]["value"].get<double>());
      for (const auto& [d, v] : m["multi_hop_cross_r20"].items())
        out.samples[method]["hop" + d + "_r@20"].push_back(v.get<double>());
    }
  };
  if (metrics.contains("per_seed")) {
    for (const auto& [seed, entry] : metrics["per_seed"].items())
      if (entry.contains("methods")) absorb_report(entry);
  } else if (metrics.contains("methods")) {
    absorb_report(metrics);
  } else {
    throw pam::ConfigError("run directory '" + dir + "' has no per-method metrics to consolidate");
  }
  return out;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir, bool force) {
  if (run_dirs.empty()) throw pam::ConfigError("report: at least one run directory is required");
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
  std::map<std::string, std::string> hashes;
  for (const std::string& dir : run_dirs) {
    RunSamples run = read_run_dir(dir);
    if (!run.world_hash.empty()) hashes[dir] = run.world_hash;
    for (auto& [method, metrics] : run.samples)
      for (auto& [metric, values] : metrics)
        samples[method][metric].insert(samples[method][metric].end(), values.begin(), values.end());
  }
  std::set<std::string> distinct;
  for (const auto& [dir, hash] : hashes) distinct.insert(hash);
  if (distinct.size() > 1) {
    std::string diag = "refusing to consolidate runs over different worlds:";
    for (const auto& [dir, hash] : hashes) diag += "\n  " + dir + " world_hash=" + hash;
    throw pam::ConfigError(diag);
  }

  if (!force && fs::exists(fs::path(out_dir) / "report.md"))
    throw pam::ConfigError("refusing to overwrite existing path '" + (fs::path(out_dir) / "report.md").string() +
                           "' (pass --force to allow)");
  fs::create_directories(out_dir);

  std::vector<std::string> methods;
  for (const std::string& preferred : {"predictor", "cosine", "bilinear"})
    if (samples.count(preferred)) methods.push_back(preferred);
  for (const auto& [name, _] : samples)
    if (std::find(methods.begin(), methods.end(), name) == methods.end()) methods.push_back(name);
  std::set<std::string> metric_names;
  for (const auto& [_, metrics] : samples)
    for (const auto& [metric, __] : metrics) metric_names.insert(metric);

  auto stats = [&](const std::string& method, const std::string& metric) -> std::optional<std::pair<double, double>> {
    const auto mit = samples.find(method);
    if (mit == samples.end()) return std::nullopt;
    const auto vit = mit->second.find(metric);
    if (vit == mit->second.end() || vit->second.empty()) return std::nullopt;
    const auto& values = vit->second;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return std::make_pair(mean, -1.0);  // SD column left empty
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::make_pair(mean, std::sqrt(ss / static_cast<double>(values.size() - 1)));
  };

  std::ostringstream md, csv;
  md << "# Consolidated metrics\n\nRuns: " << run_dirs.size() << "\n\n| metric |";
  csv << "metric";
  for (const auto& m : methods) {
    md << " " << m << " |";
    csv << "," << m << "_mean," << m << "_sd";
  }
  md << "\n|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) md << "---|";
  md << "\n";
  csv << "\n";
  csv.precision(10);
  for (const auto& metric : metric_names) {
    md << "| " << metric << " |";
    csv << metric;
    for (const auto& method : methods) {
      const auto s = stats(method, metric);
      if (!s) {
        md << " |";
        csv << ",,";
        continue;
      }
      char buf[64];
      if (s->second >= 0.0) {
        std::snprintf(buf, sizeof(buf), " %.3f ± %.3f |", s->first, s->second);
        csv << "," << s->first << "," << s->second;
      } else {
        std::snprintf(buf, sizeof(buf), " %.3f |", s->first);
        csv << "," << s->first << ",";
      }
      md << buf;
    }
    md << "\n";
    csv << "\n";
  }
  pam::write_text_file((fs::path(out_dir) / "report.md").string(), md.str());
  pam::write_text_file((fs::path(out_dir) / "report.csv").string(), csv.str());
  std::cout << "report -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"association-recall benchmark laboratory"};
  app.require_subcommand(1);

  CommonArgs common;
  std::optional<std::uint64_t> seed_override;

  auto* gen = app.add_subcommand("gen-world", "generate a synthetic trajectory world");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "world config file (key = value)")->required();
  gen->add_option("--out", gen_out, "output world file (.pamw)")->required();
  gen->add_option("--seed", seed_override, "override the config seed");
  gen->add_flag("--force", common.force, "overwrite existing outputs");
  add_threads_flag(gen, common);

  auto* train = app.add_subcommand("train", "train the predictor or the bilinear baseline");
  std::string train_world, train_config, train_out;
  train->add_option("--world", train_world, "world file")->required();
  train->add_option("--config", train_config, "train config file")->required();
  train->add_option("--out", train_out, "output checkpoint (.pamm / .pamb)")->required();
  train->add_option("--seed", seed_override, "override init/pair seeds");
  train->add_flag("--force", common.force, "overwrite existing outputs");
  add_threads_flag(train, common);

  auto* eval = app.add_subcommand("eval", "compute the metric suite for stored checkpoints");
  std::string eval_world, eval_config, eval_pred, eval_bil, eval_out;
  bool eval_graph_csv = false;
  eval->add_option("--world", eval_world, "world file")->required();
  eval->add_option("--config", eval_config, "eval config file")->required();
  eval->add_option("--predictor", eval_pred, "predictor checkpoint (.pamm)");
  eval->add_option("--bilinear", eval_bil, "bilinear checkpoint (.pamb)");
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_flag("--graph-csv", eval_graph_csv, "also export the association graph as CSV");
  eval->add_flag("--force", common.force, "overwrite existing outputs");
  add_threads_flag(eval, common);

  auto* ablate = app.add_subcommand("ablate", "run a named experiment pipeline");
  std::string ablate_name, ablate_spec, ablate_out;
  ablate->add_option("--name", ablate_name, "experiment name")->required();
  ablate->add_option("--spec", ablate_spec, "experiment spec (json)")->required();
  ablate->add_option("--out", ablate_out, "run directory")->required();
  ablate->add_flag("--force", common.force, "overwrite existing outputs");
  add_threads_flag(ablate, common);

  auto* report = app.add_subcommand("report", "consolidate run directories into one table");
  std::vector<std::string> report_dirs;
  std::string report_out;
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory")->required();
  report->add_flag("--force", common.force, "overwrite existing outputs");
  add_threads_flag(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    pam::set_threads(common.threads);
    if (gen->parsed()) return cmd_gen_world(gen_config, gen_out, common.force, seed_override);
    if (train->parsed()) return cmd_train(train_world, train_config, train_out, common.force, seed_override);
    if (eval->parsed())
      return cmd_eval(eval_world, eval_config, eval_pred, eval_bil, eval_out, common.force, eval_graph_csv);
    if (ablate->parsed()) return cmd_ablate(ablate_name, ablate_spec, ablate_out, common.force);
    if (report->parsed()) return cmd_report(report_dirs, report_out, common.force);
  } catch (const pam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pam::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const pam::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
