#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pam/io.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Named, reproducible experiment pipelines. Every experiment is a pure
// function of its spec: rerunning writes byte-identical metrics.json.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"main",          "shuffle",        "matched_negatives",
                                                 "holdout_anchor", "edge_disjoint", "bridging_oracle",
                                                 "arch_sweep"};
  return names;
}

struct ExperimentSpec {
  std::string name = "main";
  WorldConfig world;
  int tau = 5;
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::uint64_t> train_seeds = {42, 123, 456};
  bool train_bilinear = true;
  double holdout_fraction = 0.2;
  std::uint64_t holdout_seed = 7;
  double split_fraction = 0.7;
  std::uint64_t split_seed = 9;
  std::uint64_t shuffle_seed = 11;
  long long split_n_pairs = 0;          // 0: scale train.n_pairs by split_fraction
  std::vector<std::string> arch_rows;   // empty: every sweep row

  void validate() const {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      std::string valid;
      for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
      throw ConfigError("unknown experiment '" + name + "'; valid names: " + valid);
    }
    if (train_seeds.empty()) throw ConfigError("experiment spec: train_seeds must be non-empty");
    world.validate();
    train.validate();
    eval.validate();
    if (tau < 1) throw ConfigError("experiment spec: tau must be >= 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw ConfigError("experiment spec: holdout_fraction must be in (0, 1)");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
      throw ConfigError("experiment spec: split_fraction must be in (0, 1)");
  }
};

inline Json to_json(const ExperimentSpec& s) {
  return Json{{"experiment", s.name},
              {"world", to_json(s.world)},
              {"tau", s.tau},
              {"train", to_json(s.train)},
              {"eval", to_json(s.eval)},
              {"train_seeds", s.train_seeds},
              {"train_bilinear", s.train_bilinear},
              {"holdout", {{"fraction", s.holdout_fraction}, {"seed", s.holdout_seed}}},
              {"edge_split", {{"fraction", s.split_fraction}, {"seed", s.split_seed}}},
              {"shuffle_seed", s.shuffle_seed},
              {"split_n_pairs", s.split_n_pairs},
              {"arch_rows", s.arch_rows}};
}

inline ExperimentSpec experiment_spec_from_json(const Json& j) {
  ExperimentSpec s;
  s.name = j.at("experiment").get<std::string>();
  if (j.contains("world")) {
    const Json& w = j["world"];
    WorldConfig& c = s.world;
    c.embed_dim = w.value("embed_dim", c.embed_dim);
    c.n_rooms = w.value("n_rooms", c.n_rooms);
    c.room_scale = w.value("room_scale", c.room_scale);
    c.n_objects = w.value("n_objects", c.n_objects);
    c.objects_per_room = w.value("objects_per_room", c.objects_per_room);
    c.n_shared_objects = w.value("n_shared_objects", c.n_shared_objects);
    c.object_scale = w.value("object_scale", c.object_scale);
    c.n_trajectories = w.value("n_trajectories", c.n_trajectories);
    c.trajectory_len = w.value("trajectory_len", c.trajectory_len);
    c.room_dwell_mean = w.value("room_dwell_mean", c.room_dwell_mean);
    c.state_noise_sigma = w.value("state_noise_sigma", c.state_noise_sigma);
    c.seed = w.value("seed", c.seed);
  }
  s.tau = j.value("tau", 5);
  if (j.contains("train")) {
    const Json& t = j["train"];
    TrainConfig& cfg = s.train;
    cfg.epochs = t.value("epochs", cfg.epochs);
    cfg.batch_size = t.value("batch_size", cfg.batch_size);
    cfg.n_pairs = t.value("n_pairs", cfg.n_pairs);
    if (t.contains("sampling")) {
      const std::string mode = t["sampling"].get<std::string>();
      if (mode == "fixed")
        cfg.sampling = SamplingMode::kFixed;
      else if (mode == "online")
        cfg.sampling = SamplingMode::kOnline;
      else
        throw ConfigError("experiment spec: train.sampling must be fixed or online");
    }
    cfg.hidden_dim = t.value("hidden_dim", cfg.hidden_dim);
    cfg.n_layers = t.value("n_layers", cfg.n_layers);
    cfg.schedule.lr_start = t.value("lr_start", cfg.schedule.lr_start);
    cfg.schedule.lr_end = t.value("lr_end", cfg.schedule.lr_end);
    cfg.schedule.temp_start = t.value("temp_start", cfg.schedule.temp_start);
    cfg.schedule.temp_end = t.value("temp_end", cfg.schedule.temp_end);
    cfg.schedule.total_epochs = t.value("schedule_epochs", cfg.epochs);
    cfg.init_seed = t.value("init_seed", cfg.init_seed);
    cfg.pair_seed = t.value("pair_seed", cfg.pair_seed);
  }
  s.train.schedule.total_epochs = j.contains("train") && j["train"].contains("schedule_epochs")
                                      ? s.train.schedule.total_epochs
                                      : s.train.epochs;
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    EvalConfig& cfg = s.eval;
    if (e.contains("k_values")) cfg.k_values = e["k_values"].get<std::vector<int>>();
    cfg.n_queries_precision = e.value("n_queries_precision", cfg.n_queries_precision);
    cfg.n_queries_cbr = e.value("n_queries_cbr", cfg.n_queries_cbr);
    cfg.n_queries_auc = e.value("n_queries_auc", cfg.n_queries_auc);
    cfg.auc_negative_cap = e.value("auc_negative_cap", cfg.auc_negative_cap);
    cfg.n_queries_spec = e.value("n_queries_spec", cfg.n_queries_spec);
    cfg.query_seed = e.value("query_seed", cfg.query_seed);
    if (e.contains("hop_depths")) cfg.hop_depths = e["hop_depths"].get<std::vector<int>>();
    cfg.hop_beam = e.value("hop_beam", cfg.hop_beam);
    cfg.hop_k = e.value("hop_k", cfg.hop_k);
    cfg.recency_lambda = e.value("recency_lambda", cfg.recency_lambda);
    if (e.contains("recency_grid")) cfg.recency_grid = e["recency_grid"].get<std::vector<double>>();
    cfg.recency_k = e.value("recency_k", cfg.recency_k);
  }
  if (j.contains("train_seeds")) s.train_seeds = j["train_seeds"].get<std::vector<std::uint64_t>>();
  s.train_bilinear = j.value("train_bilinear", true);
  if (j.contains("holdout")) {
    s.holdout_fraction = j["holdout"].value("fraction", s.holdout_fraction);
    s.holdout_seed = j["holdout"].value("seed", s.holdout_seed);
  }
  if (j.contains("edge_split")) {
    s.split_fraction = j["edge_split"].value("fraction", s.split_fraction);
    s.split_seed = j["edge_split"].value("seed", s.split_seed);
  }
  s.shuffle_seed = j.value("shuffle_seed", s.shuffle_seed);
  s.split_n_pairs = j.value("split_n_pairs", s.split_n_pairs);
  if (j.contains("arch_rows")) s.arch_rows = j["arch_rows"].get<std::vector<std::string>>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Shared runner plumbing.
// ---------------------------------------------------------------------------

namespace ablate_detail {

struct RunContext {
  std::filesystem::path dir;
  RunManifest manifest;
  World world;  // loaded back from the written file, so checkpoints and CLI runs agree
  AssociationGraph graph;
  std::string world_hash;
  std::string log;
};

inline RunContext prepare_run(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  RunContext ctx;
  ctx.dir = out_dir;
  std::filesystem::create_directories(ctx.dir);
  write_text_file((ctx.dir / "spec.json").string(), to_json(spec).dump(2) + "\n");
  ctx.manifest.record_config("spec", to_json(spec));
  for (std::uint64_t seed : spec.train_seeds)
    ctx.manifest.seeds["train_" + std::to_string(seed)] = seed;
  ctx.manifest.seeds["world"] = spec.world.seed;
  ctx.manifest.seeds["query"] = spec.eval.query_seed;

  const World generated = gen_world(spec.world);
  save_world(generated, (ctx.dir / "world.pamw").string());
  write_text_file((ctx.dir / "world.json").string(), to_json(spec.world).dump(2) + "\n");
  ctx.world = load_world((ctx.dir / "world.pamw").string());
  ctx.world_hash = hex64(fnv1a64_file((ctx.dir / "world.pamw").string()));
  ctx.graph = build_graph(ctx.world, spec.tau);
  ctx.manifest.record_file(ctx.dir, "world.pamw");
  ctx.manifest.record_file(ctx.dir, "world.json");
  ctx.manifest.record_file(ctx.dir, "spec.json");
  ctx.log += "experiment: " + spec.name + "\n";
  ctx.log += "world states: " + std::to_string(ctx.world.state_count()) +
             ", edges: " + std::to_string(ctx.graph.edge_count()) + "\n";
  return ctx;
}

inline void write_loss_csv(const std::filesystem::path& dir, const std::string& name, const TrainReport& report,
                           RunManifest& manifest) {
  std::ostringstream out;
  out << "epoch,loss\n";
  out.precision(12);
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) out << e << "," << report.epoch_loss[e] << "\n";
  write_text_file((dir / name).string(), out.str());
  manifest.record_file(dir, name);
}

inline Json train_summary(const TrainReport& report) {
  // wall-clock stays out of metrics.json so reruns are byte-identical
  return Json{{"final_loss", report.final_loss},
              {"epochs", report.epoch_loss.size()},
              {"pairs_per_epoch", report.pairs_per_epoch},
              {"model", report.model},
              {"sampling", report.sampling}};
}

// mean and sample SD (n-1) per method x metric over per-seed reports
inline Json aggregate_reports(const std::vector<std::pair<std::uint64_t, MetricsReport>>& per_seed) {
  Json mean, sd;
  if (per_seed.empty()) return Json{{"mean", mean}, {"sd", sd}};
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
  for (const auto& [seed, report] : per_seed)
    for (const auto& [method, metrics] : report.methods)
      for (const auto& [key, value] : metrics.flatten()) samples[method][key].push_back(value);
  for (const auto& [method, metric_map] : samples)
    for (const auto& [key, values] : metric_map) {
      double sum = 0.0;
      for (double v : values) sum += v;
      const double avg = sum / static_cast<double>(values.size());
      mean[method][key] = avg;
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - avg) * (v - avg);
        sd[method][key] = std::sqrt(ss / static_cast<double>(values.size() - 1));
      } else {
        sd[method][key] = 0.0;
      }
    }
  return Json{{"mean", mean}, {"sd", sd}};
}

inline TrainConfig seeded(TrainConfig cfg, std::uint64_t seed) {
  cfg.init_seed = seed;
  cfg.pair_seed = seed;
  return cfg;
}

struct TrainedPredictor {
  MlpParams params;
  TrainReport report;
};

// Train, checkpoint, and reload, so evaluation always sees exactly what was
// persisted (the on-disk f32 precision).
inline TrainedPredictor train_predictor_checkpointed(const RunContext& ctx, const TrainConfig& cfg,
                                                     const World& world, const AssociationGraph& graph,
                                                     const std::string& file_name, RunManifest& manifest) {
  auto [params, report] = train(world, graph, cfg);
  save_predictor(params, to_json(cfg).dump(), (ctx.dir / file_name).string());
  manifest.record_file(ctx.dir, file_name);
  return {load_predictor((ctx.dir / file_name).string()), std::move(report)};
}

struct TrainedBilinear {
  BilinearParams params;
  TrainReport report;
};

inline TrainedBilinear train_bilinear_checkpointed(const RunContext& ctx, const TrainConfig& cfg,
                                                   const World& world, const AssociationGraph& graph,
                                                   const std::string& file_name, RunManifest& manifest) {
  auto [params, report] = bilinear_train(world, graph, cfg);
  save_bilinear(params, to_json(cfg).dump(), (ctx.dir / file_name).string());
  manifest.record_file(ctx.dir, file_name);
  return {load_bilinear((ctx.dir / file_name).string()), std::move(report)};
}

inline double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

// Cross-room recall@k of a query against labels from a specific edge subset.
inline double subset_cbr_at_k(const Scorer& scorer, const AssociationGraph& label_graph, int query, int k) {
  const auto cross = label_graph.cross_room_associates(query);
  const auto scores = scorer.score_state(query);
  return cbr_at_k(top_k_ranked(scores, k, {query}), cross, k);
}

// Reciprocal rank of the best-ranked cross-room associate under the labels.
inline double reciprocal_rank_first_cross(const Scorer& scorer, const AssociationGraph& label_graph, int query) {
  const auto cross = label_graph.cross_room_associates(query);
  if (cross.empty()) return 0.0;
  const auto scores = scorer.score_state(query);
  long long best_rank = -1;
  for (int a : cross) {
    long long rank = 1;
    for (int m = 0; m < static_cast<int>(scores.size()); ++m) {
      if (m == query || m == a) continue;
      if (ranks_before(scores, m, a)) ++rank;
    }
    if (best_rank < 0 || rank < best_rank) best_rank = rank;
  }
  return 1.0 / static_cast<double>(best_rank);
}

}  // namespace ablate_detail

// 2-hop oracle with perfect graph knowledge: from each query, can two hops
// along experienced associations reach a state of another trajectory? On any
// graph built from within-trajectory windows the answer is structurally no.
inline double bridging_reach_rate(const AssociationGraph& graph, const std::vector<int>& queries) {
  long long reached = 0;
  for (int q : queries) {
    const int traj = graph.state_traj[static_cast<std::size_t>(q)];
    bool found = false;
    for (int hop1 : graph.associates(q)) {
      if (graph.state_traj[static_cast<std::size_t>(hop1)] != traj) found = true;
      if (!found)
        for (int hop2 : graph.associates(hop1))
          if (graph.state_traj[static_cast<std::size_t>(hop2)] != traj) {
            found = true;
            break;
          }
      if (found) break;
    }
    if (found) ++reached;
  }
  return queries.empty() ? 0.0 : static_cast<double>(reached) / static_cast<double>(queries.size());
}

// ---------------------------------------------------------------------------
// Experiments.
// ---------------------------------------------------------------------------

namespace ablate_detail {

inline Json run_main(RunContext& ctx, const ExperimentSpec& spec) {
  std::vector<std::pair<std::uint64_t, MetricsReport>> per_seed;
  Json seeds_json;
  for (std::uint64_t seed : spec.train_seeds) {
    const TrainConfig cfg = seeded(spec.train, seed);
    const auto predictor =
        train_predictor_checkpointed(ctx, cfg, ctx.world, ctx.graph, "predictor_" + std::to_string(seed) + ".pamm",
                                     ctx.manifest);
    write_loss_csv(ctx.dir, "loss_predictor_" + std::to_string(seed) + ".csv", predictor.report, ctx.manifest);
    std::vector<Scorer> scorers;
    scorers.push_back(make_predictor_scorer(ctx.world, predictor.params));
    scorers.push_back(make_cosine_scorer(ctx.world));
    Json trains{{"predictor", train_summary(predictor.report)}};
    if (spec.train_bilinear) {
      const auto bilinear = train_bilinear_checkpointed(ctx, cfg, ctx.world, ctx.graph,
                                                        "bilinear_" + std::to_string(seed) + ".pamb", ctx.manifest);
      write_loss_csv(ctx.dir, "loss_bilinear_" + std::to_string(seed) + ".csv", bilinear.report, ctx.manifest);
      scorers.push_back(make_bilinear_scorer(ctx.world, bilinear.params));
      trains["bilinear"] = train_summary(bilinear.report);
    }
    MetricsReport report = evaluate_scorers(scorers, ctx.graph, spec.eval);
    Json entry = to_json(report);
    entry["training"] = trains;
    seeds_json[std::to_string(seed)] = entry;
    per_seed.emplace_back(seed, std::move(report));
  }
  Json aggregate = aggregate_reports(per_seed);
  return Json{{"experiment", "main"},
              {"world_hash", ctx.world_hash},
              {"per_seed", seeds_json},
              {"mean", aggregate["mean"]},
              {"sd", aggregate["sd"]}};
}

inline Json run_shuffle(RunContext& ctx, const ExperimentSpec& spec) {
  // Both arms share the world file; only the association graph differs. The
  // shuffled arm trains and is scored on the pseudo-associations produced by
  // permuting timesteps within each trajectory.
  const AssociationGraph pseudo = build_shuffled_graph(ctx.world, spec.tau, spec.shuffle_seed);
  Json seeds_json;
  std::vector<double> cbr_collapse, ap_collapse;
  for (std::uint64_t seed : spec.train_seeds) {
    const TrainConfig cfg = seeded(spec.train, seed);
    const auto intact = train_predictor_checkpointed(ctx, cfg, ctx.world, ctx.graph,
                                                     "predictor_intact_" + std::to_string(seed) + ".pamm",
                                                     ctx.manifest);
    const auto shuffled = train_predictor_checkpointed(ctx, cfg, ctx.world, pseudo,
                                                       "predictor_shuffled_" + std::to_string(seed) + ".pamm",
                                                       ctx.manifest);
    const MetricsReport report_intact =
        evaluate_scorers({make_predictor_scorer(ctx.world, intact.params)}, ctx.graph, spec.eval);
    const MetricsReport report_shuffled =
        evaluate_scorers({make_predictor_scorer(ctx.world, shuffled.params)}, pseudo, spec.eval);

    const auto& mi = report_intact.methods.at("predictor");
    const auto& ms = report_shuffled.methods.at("predictor");
    const int k_last = spec.eval.k_values.back();
    const double cbr_drop = mi.cbr.at(k_last) > 0.0 ? 1.0 - ms.cbr.at(k_last) / mi.cbr.at(k_last) : 0.0;
    const double ap_drop = mi.ap.at(k_last) > 0.0 ? 1.0 - ms.ap.at(k_last) / mi.ap.at(k_last) : 0.0;
    cbr_collapse.push_back(cbr_drop);
    ap_collapse.push_back(ap_drop);
    seeds_json[std::to_string(seed)] = Json{{"intact", to_json(report_intact)},
                                            {"shuffled", to_json(report_shuffled)},
                                            {"collapse",
                                             {{"cbr@" + std::to_string(k_last), cbr_drop},
                                              {"ap@" + std::to_string(k_last), ap_drop}}}};
  }
  return Json{{"experiment", "shuffle"},
              {"world_hash", ctx.world_hash},
              {"arms_share_world", true},
              {"per_seed", seeds_json},
              {"mean_collapse",
               {{"cbr", mean_of(cbr_collapse)}, {"ap", mean_of(ap_collapse)}}}};
}

inline Json run_matched_negatives(RunContext& ctx, const ExperimentSpec& spec) {
  // Negatives are same-room states never temporally co-present with the
  // query: maximally similar in embedding space, no associative link.
  const auto queries = select_queries(ctx.graph, QueryCriterion::min_assoc(spec.eval.min_assoc_auc),
                                      spec.eval.n_queries_auc, spec.eval.query_seed, eval_detail::kAucStream);
  constexpr std::uint64_t kMatchedNegBase = 1u << 26;

  struct QueryNegatives {
    int query;
    std::vector<int> negatives;
  };
  std::vector<QueryNegatives> pools;
  bool audit_non_adjacent = true;
  for (int q : queries.ids) {
    auto negatives = eval_detail::same_room_non_associates(ctx.graph, q);
    negatives = eval_detail::cap_negatives(std::move(negatives), spec.eval.auc_negative_cap, spec.eval.query_seed,
                                           kMatchedNegBase + static_cast<std::uint64_t>(q));
    for (int n : negatives)
      if (ctx.graph.are_associated(q, n)) audit_non_adjacent = false;
    if (!negatives.empty()) pools.push_back({q, std::move(negatives)});
  }
  if (pools.empty())
    return Json{{"experiment", "matched_negatives"},
                {"world_hash", ctx.world_hash},
                {"not_applicable", true},
                {"reason", "no same-room never-co-present negatives exist under this tau"}};

  auto method_auc = [&](const Scorer& scorer) {
    double sum = 0.0;
    for (const auto& pool : pools) {
      const auto scores = scorer.score_state(pool.query);
      std::vector<double> pos, neg;
      for (int a : ctx.graph.associates(pool.query)) pos.push_back(scores[static_cast<std::size_t>(a)]);
      for (int n : pool.negatives) neg.push_back(scores[static_cast<std::size_t>(n)]);
      sum += discrimination_auc(pos, neg);
    }
    return sum / static_cast<double>(pools.size());
  };

  Json seeds_json;
  std::map<std::string, std::vector<double>> by_method;
  for (std::uint64_t seed : spec.train_seeds) {
    const TrainConfig cfg = seeded(spec.train, seed);
    const auto predictor = train_predictor_checkpointed(
        ctx, cfg, ctx.world, ctx.graph, "predictor_" + std::to_string(seed) + ".pamm", ctx.manifest);
    Json row{{"predictor", method_auc(make_predictor_scorer(ctx.world, predictor.params))},
             {"cosine", method_auc(make_cosine_scorer(ctx.world))}};
    if (spec.train_bilinear) {
      const auto bilinear = train_bilinear_checkpointed(ctx, cfg, ctx.world, ctx.graph,
                                                        "bilinear_" + std::to_string(seed) + ".pamb", ctx.manifest);
      row["bilinear"] = method_auc(make_bilinear_scorer(ctx.world, bilinear.params));
    }
    for (const auto& [method, value] : row.items()) by_method[method].push_back(value.get<double>());
    seeds_json[std::to_string(seed)] = row;
  }
  Json mean;
  for (const auto& [method, values] : by_method) mean[method] = mean_of(values);
  return Json{{"experiment", "matched_negatives"},
              {"world_hash", ctx.world_hash},
              {"not_applicable", false},
              {"n_queries", pools.size()},
              {"audit_negatives_non_adjacent", audit_non_adjacent},
              {"per_seed", seeds_json},
              {"mean_auc", mean}};
}

inline Json run_holdout_anchor(RunContext& ctx, const ExperimentSpec& spec) {
  const AnchorHoldout holdout = holdout_anchors(ctx.world, spec.holdout_fraction, spec.holdout_seed);
  constexpr std::uint64_t kHeldQueryStream = 64;
  constexpr std::uint64_t kTrainQueryStream = 65;

  // Queries qualify on cross-room association richness, then split by
  // membership in the held set.
  const auto qualifying =
      select_queries(ctx.graph, QueryCriterion::min_cross_assoc(spec.eval.min_cross_assoc_cbr),
                     ctx.graph.n_states, spec.eval.query_seed, 0);  // every qualifying state
  std::vector<int> held_pool, train_pool;
  for (int q : qualifying.ids) (holdout.is_held(q) ? held_pool : train_pool).push_back(q);

  auto sample_pool = [&](const std::vector<int>& pool, std::uint64_t stream) {
    if (static_cast<int>(pool.size()) <= spec.eval.n_queries_cbr) return pool;
    Rng rng(spec.eval.query_seed, stream);
    std::vector<int> out;
    for (std::size_t idx : rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(spec.eval.n_queries_cbr)))
      out.push_back(pool[idx]);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto held_queries = sample_pool(held_pool, kHeldQueryStream);
  const auto train_queries = sample_pool(train_pool, kTrainQueryStream);

  const int k = spec.eval.k_values.back();
  Json seeds_json;
  std::vector<double> held_cbr_all, train_cbr_all;
  for (std::uint64_t seed : spec.train_seeds) {
    TrainConfig cfg = seeded(spec.train, seed);
    cfg.anchor_holdout = holdout;
    // audit: the holdout must keep held states off the anchor side
    bool audit_ok = true;
    for (const auto& [anchor, target] : sample_pairs(ctx.graph, cfg))
      if (holdout.is_held(anchor)) audit_ok = false;
    const auto predictor = train_predictor_checkpointed(
        ctx, cfg, ctx.world, ctx.graph, "predictor_" + std::to_string(seed) + ".pamm", ctx.manifest);
    const Scorer scorer = make_predictor_scorer(ctx.world, predictor.params);
    std::vector<double> held_scores, train_scores;
    for (int q : held_queries) held_scores.push_back(subset_cbr_at_k(scorer, ctx.graph, q, k));
    for (int q : train_queries) train_scores.push_back(subset_cbr_at_k(scorer, ctx.graph, q, k));
    const double held_cbr = mean_of(held_scores);
    const double train_cbr = mean_of(train_scores);
    held_cbr_all.push_back(held_cbr);
    train_cbr_all.push_back(train_cbr);
    seeds_json[std::to_string(seed)] = Json{{"held_cbr@" + std::to_string(k), held_cbr},
                                            {"train_anchor_cbr@" + std::to_string(k), train_cbr},
                                            {"audit_no_held_anchors", audit_ok}};
  }
  return Json{{"experiment", "holdout_anchor"},
              {"world_hash", ctx.world_hash},
              {"held_fraction", spec.holdout_fraction},
              {"held_count", holdout.held_states.size()},
              {"n_held_queries", held_queries.size()},
              {"n_train_queries", train_queries.size()},
              {"per_seed", seeds_json},
              {"mean", {{"held_cbr", mean_of(held_cbr_all)}, {"train_anchor_cbr", mean_of(train_cbr_all)}}}};
}

inline long long split_pairs_or_default(const ExperimentSpec& spec) {
  if (spec.split_n_pairs > 0) return spec.split_n_pairs;
  return static_cast<long long>(std::llround(static_cast<double>(spec.train.n_pairs) * spec.split_fraction));
}

inline Json run_edge_disjoint(RunContext& ctx, const ExperimentSpec& spec) {
  const EdgeSplit split = split_edges(ctx.graph, spec.split_fraction, spec.split_seed);
  const AssociationGraph train_labels = filter_graph_edges(ctx.graph, split.in_train, true);
  const AssociationGraph held_labels = filter_graph_edges(ctx.graph, split.in_train, false);
  constexpr std::uint64_t kTrainArmStream = 66;
  constexpr std::uint64_t kHeldArmStream = 67;
  const auto train_queries =
      select_queries(train_labels, QueryCriterion::min_cross_assoc(spec.eval.min_cross_assoc_cbr),
                     spec.eval.n_queries_cbr, spec.eval.query_seed, kTrainArmStream);
  const auto held_queries =
      select_queries(held_labels, QueryCriterion::min_cross_assoc(spec.eval.min_cross_assoc_cbr),
                     spec.eval.n_queries_cbr, spec.eval.query_seed, kHeldArmStream);

  const int k = spec.eval.k_values.back();
  auto arm_recall = [&](const Scorer& scorer, const AssociationGraph& labels, const std::vector<int>& queries) {
    std::vector<double> values;
    for (int q : queries) values.push_back(subset_cbr_at_k(scorer, labels, q, k));
    return mean_of(values);
  };

  Json seeds_json;
  std::vector<double> tr_pred, held_pred;
  const Scorer cosine = make_cosine_scorer(ctx.world);
  const double cosine_train = arm_recall(cosine, train_labels, train_queries.ids);
  const double cosine_held = arm_recall(cosine, held_labels, held_queries.ids);
  for (std::uint64_t seed : spec.train_seeds) {
    TrainConfig cfg = seeded(spec.train, seed);
    cfg.edge_split = split;
    cfg.n_pairs = split_pairs_or_default(spec);
    const auto predictor = train_predictor_checkpointed(
        ctx, cfg, ctx.world, ctx.graph, "predictor_" + std::to_string(seed) + ".pamm", ctx.manifest);
    const Scorer scorer = make_predictor_scorer(ctx.world, predictor.params);
    const double train_r = arm_recall(scorer, train_labels, train_queries.ids);
    const double held_r = arm_recall(scorer, held_labels, held_queries.ids);
    tr_pred.push_back(train_r);
    held_pred.push_back(held_r);
    seeds_json[std::to_string(seed)] = Json{{"train_r@" + std::to_string(k), train_r},
                                            {"held_r@" + std::to_string(k), held_r}};
  }
  return Json{{"experiment", "edge_disjoint"},
              {"world_hash", ctx.world_hash},
              {"split_fraction", spec.split_fraction},
              {"n_pairs", split_pairs_or_default(spec)},
              {"per_seed", seeds_json},
              {"mean",
               {{"predictor", {{"train_r", mean_of(tr_pred)}, {"held_r", mean_of(held_pred)}}},
                {"cosine", {{"train_r", cosine_train}, {"held_r", cosine_held}}}}}};
}

inline Json run_bridging_oracle(RunContext& ctx, const ExperimentSpec& spec) {
  const long long cross_edges = count_cross_trajectory_edges(ctx.graph);

  // Count cross-trajectory state pairs whose rooms share at least one object:
  // the pool of would-be bridge anchors if entities persisted across episodes.
  const int n_rooms = ctx.world.config.n_rooms;
  const int n_traj = ctx.world.config.n_trajectories;
  std::vector<std::vector<long long>> per_traj_room(static_cast<std::size_t>(n_traj),
                                                    std::vector<long long>(static_cast<std::size_t>(n_rooms), 0));
  std::vector<long long> room_total(static_cast<std::size_t>(n_rooms), 0);
  for (const StateRecord& s : ctx.world.states) {
    ++per_traj_room[static_cast<std::size_t>(s.trajectory_id)][static_cast<std::size_t>(s.room_id)];
    ++room_total[static_cast<std::size_t>(s.room_id)];
  }
  std::vector<std::set<int>> room_objects(static_cast<std::size_t>(n_rooms));
  for (const auto& [obj, rooms] : ctx.world.object_rooms)
    for (int room : rooms) room_objects[static_cast<std::size_t>(room)].insert(obj);
  auto rooms_share_object = [&](int a, int b) {
    const auto& small = room_objects[static_cast<std::size_t>(a)].size() <= room_objects[static_cast<std::size_t>(b)].size()
                            ? room_objects[static_cast<std::size_t>(a)]
                            : room_objects[static_cast<std::size_t>(b)];
    const auto& big = room_objects[static_cast<std::size_t>(a)].size() <= room_objects[static_cast<std::size_t>(b)].size()
                          ? room_objects[static_cast<std::size_t>(b)]
                          : room_objects[static_cast<std::size_t>(a)];
    for (int obj : small)
      if (big.count(obj)) return true;
    return false;
  };
  long long bridge_pairs = 0;
  for (int a = 0; a < n_rooms; ++a)
    for (int b = a; b < n_rooms; ++b) {
      if (!rooms_share_object(a, b)) continue;
      long long same_traj = 0;
      for (int t = 0; t < n_traj; ++t)
        same_traj += per_traj_room[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] *
                     per_traj_room[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      const long long total = room_total[static_cast<std::size_t>(a)] * room_total[static_cast<std::size_t>(b)];
      if (a == b)
        bridge_pairs += (total - same_traj) / 2;
      else
        bridge_pairs += total - same_traj;
    }

  constexpr std::uint64_t kOracleQueryStream = 68;
  std::vector<int> queries;
  {
    const int want = spec.eval.n_queries_cbr;
    if (ctx.graph.n_states <= want) {
      for (int s = 0; s < ctx.graph.n_states; ++s) queries.push_back(s);
    } else {
      Rng rng(spec.eval.query_seed, kOracleQueryStream);
      for (std::size_t idx :
           rng.sample_without_replacement(static_cast<std::size_t>(ctx.graph.n_states), static_cast<std::size_t>(want)))
        queries.push_back(static_cast<int>(idx));
      std::sort(queries.begin(), queries.end());
    }
  }
  const double reach_rate = bridging_reach_rate(ctx.graph, queries);
  return Json{{"experiment", "bridging_oracle"},
              {"world_hash", ctx.world_hash},
              {"cross_trajectory_edges", cross_edges},
              {"potential_bridge_pairs", bridge_pairs},
              {"oracle_reach_rate", reach_rate},
              {"n_queries", queries.size()}};
}

struct SweepRow {
  std::string name;
  int n_layers;
  bool full_hidden;
  bool full_pairs;
  SamplingMode sampling;
};

inline Json run_arch_sweep(RunContext& ctx, const ExperimentSpec& spec) {
  // Diagnostic ladder over depth, width, pair coverage, and sampling mode,
  // evaluated on the train side of an edge-disjoint split.
  const std::vector<SweepRow> all_rows = {
      {"baseline", 3, false, false, SamplingMode::kFixed}, {"capacity", 3, true, false, SamplingMode::kFixed},
      {"depth", 4, true, false, SamplingMode::kFixed},     {"coverage", 3, true, true, SamplingMode::kFixed},
      {"online", 4, true, true, SamplingMode::kOnline},    {"fixed", 4, true, true, SamplingMode::kFixed},
  };
  std::vector<SweepRow> rows;
  if (spec.arch_rows.empty()) {
    rows = all_rows;
  } else {
    for (const std::string& want : spec.arch_rows) {
      const auto it = std::find_if(all_rows.begin(), all_rows.end(),
                                   [&](const SweepRow& r) { return r.name == want; });
      if (it == all_rows.end()) throw ConfigError("arch_sweep: unknown row '" + want + "'");
      rows.push_back(*it);
    }
  }

  const EdgeSplit split = split_edges(ctx.graph, spec.split_fraction, spec.split_seed);
  const AssociationGraph train_labels = filter_graph_edges(ctx.graph, split.in_train, true);
  constexpr std::uint64_t kSweepQueryStream = 69;
  const auto queries =
      select_queries(train_labels, QueryCriterion::min_cross_assoc(spec.eval.min_cross_assoc_cbr),
                     spec.eval.n_queries_cbr, spec.eval.query_seed, kSweepQueryStream);
  const long long full_pairs = split_pairs_or_default(spec);
  const int k = spec.eval.k_values.back();
  const std::uint64_t seed = spec.train_seeds.front();

  Json rows_json = Json::array();
  for (const SweepRow& row : rows) {
    TrainConfig cfg = seeded(spec.train, seed);
    cfg.edge_split = split;
    cfg.n_layers = row.n_layers;
    cfg.hidden_dim = row.full_hidden ? spec.train.hidden_dim : std::max(8, spec.train.hidden_dim / 4);
    cfg.n_pairs = row.full_pairs ? full_pairs : std::max<long long>(2, full_pairs / 2);
    cfg.sampling = row.sampling;
    const auto predictor = train_predictor_checkpointed(ctx, cfg, ctx.world, ctx.graph,
                                                        "predictor_" + row.name + ".pamm", ctx.manifest);
    write_loss_csv(ctx.dir, "loss_" + row.name + ".csv", predictor.report, ctx.manifest);
    const Scorer scorer = make_predictor_scorer(ctx.world, predictor.params);
    std::vector<double> recalls, rranks;
    for (int q : queries.ids) {
      recalls.push_back(subset_cbr_at_k(scorer, train_labels, q, k));
      rranks.push_back(reciprocal_rank_first_cross(scorer, train_labels, q));
    }
    rows_json.push_back(Json{{"name", row.name},
                             {"layers", row.n_layers},
                             {"hidden", cfg.hidden_dim},
                             {"n_pairs", cfg.n_pairs},
                             {"sampling", sampling_mode_name(row.sampling)},
                             {"final_loss", predictor.report.final_loss},
                             {"r@" + std::to_string(k), mean_of(recalls)},
                             {"mrr", mean_of(rranks)}});
  }
  return Json{{"experiment", "arch_sweep"},
              {"world_hash", ctx.world_hash},
              {"train_seed", seed},
              {"split_fraction", spec.split_fraction},
              {"rows", rows_json}};
}

inline std::string flat_csv(const Json& node) {
  // key,value rows over the flattened JSON tree
  std::ostringstream out;
  out << "key,value\n";
  out.precision(12);
  std::function<void(const Json&, const std::string&)> walk = [&](const Json& j, const std::string& prefix) {
    if (j.is_object()) {
      for (const auto& [key, value] : j.items()) walk(value, prefix.empty() ? key : prefix + "." + key);
    } else if (j.is_array()) {
      int idx = 0;
      for (const auto& value : j) walk(value, prefix + "[" + std::to_string(idx++) + "]");
    } else {
      out << prefix << "," << j.dump() << "\n";
    }
  };
  walk(node, "");
  return out.str();
}

}  // namespace ablate_detail

// Runs the named experiment into out_dir. Writes spec.json, the world file
// and sidecar, checkpoints, metrics.json, metrics.csv, log.txt, and a
// manifest with content hashes of every output file.
inline Json run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  using namespace ablate_detail;
  RunContext ctx = prepare_run(spec, out_dir);
  Json metrics;
  if (spec.name == "main")
    metrics = run_main(ctx, spec);
  else if (spec.name == "shuffle")
    metrics = run_shuffle(ctx, spec);
  else if (spec.name == "matched_negatives")
    metrics = run_matched_negatives(ctx, spec);
  else if (spec.name == "holdout_anchor")
    metrics = run_holdout_anchor(ctx, spec);
  else if (spec.name == "edge_disjoint")
    metrics = run_edge_disjoint(ctx, spec);
  else if (spec.name == "bridging_oracle")
    metrics = run_bridging_oracle(ctx, spec);
  else if (spec.name == "arch_sweep")
    metrics = run_arch_sweep(ctx, spec);
  else
    throw ConfigError("unknown experiment '" + spec.name + "'");

  write_text_file((ctx.dir / "metrics.json").string(), metrics.dump(2) + "\n");
  ctx.manifest.record_file(ctx.dir, "metrics.json");
  if (spec.name == "main") {
    // Table-shaped CSV of the aggregate means
    std::ostringstream csv;
    csv << "metric";
    std::vector<std::string> methods;
    for (const auto& [method, _] : metrics["mean"].items()) methods.push_back(method);
    std::sort(methods.begin(), methods.end(), [](const std::string& a, const std::string& b) {
      auto rank = [](const std::string& m) { return m == "predictor" ? 0 : m == "cosine" ? 1 : m == "bilinear" ? 2 : 3; };
      return rank(a) != rank(b) ? rank(a) < rank(b) : a < b;
    });
    for (const auto& m : methods) csv << "," << m << "_mean," << m << "_sd";
    csv << "\n";
    std::set<std::string> keys;
    for (const auto& m : methods)
      for (const auto& [key, _] : metrics["mean"][m].items()) keys.insert(key);
    csv.precision(10);
    for (const auto& key : keys) {
      csv << key;
      for (const auto& m : methods) {
        csv << ",";
        if (metrics["mean"][m].contains(key)) csv << metrics["mean"][m][key].get<double>();
        csv << ",";
        if (metrics["sd"][m].contains(key)) csv << metrics["sd"][m][key].get<double>();
      }
      csv << "\n";
    }
    write_text_file((ctx.dir / "metrics.csv").string(), csv.str());
  } else {
    write_text_file((ctx.dir / "metrics.csv").string(), ablate_detail::flat_csv(metrics));
  }
  ctx.manifest.record_file(ctx.dir, "metrics.csv");
  ctx.log += "metrics written\n";
  write_text_file((ctx.dir / "log.txt").string(), ctx.log);
  write_manifest(ctx.dir, ctx.manifest);
  return metrics;
}

}  // namespace pam
