#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pam/assoc_graph.hpp"
#include "pam/numerics.hpp"

namespace pam {

enum class SamplingMode { kFixed, kOnline };

inline const char* sampling_mode_name(SamplingMode mode) {
  return mode == SamplingMode::kFixed ? "fixed" : "online";
}

struct TrainConfig {
  int epochs = 500;
  int batch_size = 512;
  long long n_pairs = 200000;
  SamplingMode sampling = SamplingMode::kFixed;
  int hidden_dim = 1024;
  int n_layers = 4;  // weight layers; the middle n_layers - 2 carry residual connections
  ScheduleConfig schedule;
  std::uint64_t init_seed = 42;
  std::uint64_t pair_seed = 42;
  std::optional<AnchorHoldout> anchor_holdout;
  std::optional<EdgeSplit> edge_split;

  void validate() const {
    if (epochs <= 0) throw ConfigError("train config: epochs must be positive");
    if (batch_size < 2) throw ConfigError("train config: batch_size >= 2 violated");
    if (n_pairs < 2) throw ConfigError("train config: n_pairs must be at least 2");
    if (hidden_dim <= 0) throw ConfigError("train config: hidden_dim must be positive");
    if (n_layers < 3) throw ConfigError("train config: n_layers must be at least 3");
    schedule.validate();
  }
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  long long pairs_per_epoch = 0;
  std::string model;
  std::string sampling;
};

// ---------------------------------------------------------------------------
// Directed training pairs. Every undirected edge contributes (i->j) and
// (j->i); anchors in the holdout never appear on the anchor side; with an
// edge split present, only train edges are drawn.
// ---------------------------------------------------------------------------

using DirectedPair = std::pair<int, int>;  // (anchor, target)

inline std::vector<DirectedPair> directed_pair_pool(const AssociationGraph& graph, const TrainConfig& config) {
  if (config.edge_split && config.edge_split->in_train.size() != graph.edges.size())
    throw ConfigError("train config: edge_split does not match the graph edge count");
  std::vector<DirectedPair> pool;
  pool.reserve(graph.edges.size() * 2);
  const AnchorHoldout* holdout = config.anchor_holdout ? &*config.anchor_holdout : nullptr;
  for (std::size_t idx = 0; idx < graph.edges.size(); ++idx) {
    if (config.edge_split && !config.edge_split->in_train[idx]) continue;
    const Edge& e = graph.edges[idx];
    if (!holdout || !holdout->is_held(e.i)) pool.emplace_back(e.i, e.j);
    if (!holdout || !holdout->is_held(e.j)) pool.emplace_back(e.j, e.i);
  }
  return pool;
}

namespace train_detail {
// RNG substreams under pair_seed
inline constexpr std::uint64_t kFixedDrawStream = 0;
inline constexpr std::uint64_t kOnlineDrawBase = 1u << 20;
inline constexpr std::uint64_t kEpochShuffleBase = 1u << 21;
}  // namespace train_detail

inline std::vector<DirectedPair> draw_pairs(const std::vector<DirectedPair>& pool, const TrainConfig& config,
                                            int epoch) {
  if (static_cast<std::size_t>(config.n_pairs) > pool.size())
    throw ConfigError("sample_pairs: n_pairs (" + std::to_string(config.n_pairs) +
                      ") exceeds the available directed pairs after exclusions (" + std::to_string(pool.size()) +
                      ")");
  const std::uint64_t stream = config.sampling == SamplingMode::kFixed
                                   ? train_detail::kFixedDrawStream
                                   : train_detail::kOnlineDrawBase + static_cast<std::uint64_t>(epoch);
  Rng rng(config.pair_seed, stream);
  auto picks = rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(config.n_pairs));
  std::vector<DirectedPair> pairs;
  pairs.reserve(picks.size());
  for (std::size_t idx : picks) pairs.push_back(pool[idx]);
  return pairs;
}

// Fixed mode: one draw, reused every epoch. Online mode: redrawn per epoch.
inline std::vector<DirectedPair> sample_pairs(const AssociationGraph& graph, const TrainConfig& config,
                                              int epoch = 0) {
  const auto pool = directed_pair_pool(graph, config);
  return draw_pairs(pool, config, config.sampling == SamplingMode::kFixed ? 0 : epoch);
}

inline Matrix gather_rows(const Matrix& src, const std::vector<int>& ids, std::size_t begin, std::size_t end) {
  Matrix out(static_cast<int>(end - begin), src.cols);
  for (std::size_t r = begin; r < end; ++r) {
    const double* s = src.row(ids[r]);
    std::copy(s, s + src.cols, out.row(static_cast<int>(r - begin)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared epoch/batch loop. Model must provide:
//   double train_step(const Matrix& anchors, const Matrix& targets,
//                     double temperature, double lr);
// Fully deterministic given the config seeds.
// ---------------------------------------------------------------------------

template <class Model>
TrainReport run_training(Model& model, const World& world, const AssociationGraph& graph,
                         const TrainConfig& config) {
  config.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  const auto pool = directed_pair_pool(graph, config);
  std::vector<DirectedPair> fixed_pairs;
  if (config.sampling == SamplingMode::kFixed) fixed_pairs = draw_pairs(pool, config, 0);

  TrainReport report;
  report.pairs_per_epoch = config.n_pairs;
  report.sampling = sampling_mode_name(config.sampling);
  report.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<int> anchor_ids(static_cast<std::size_t>(config.n_pairs));
  std::vector<int> target_ids(static_cast<std::size_t>(config.n_pairs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<DirectedPair> epoch_pairs;
    if (config.sampling == SamplingMode::kFixed) {
      epoch_pairs = fixed_pairs;
      Rng rng(config.pair_seed, train_detail::kEpochShuffleBase + static_cast<std::uint64_t>(epoch));
      rng.shuffle(epoch_pairs);
    } else {
      epoch_pairs = draw_pairs(pool, config, epoch);  // fresh draw is already in random order
    }
    for (std::size_t p = 0; p < epoch_pairs.size(); ++p) {
      anchor_ids[p] = epoch_pairs[p].first;
      target_ids[p] = epoch_pairs[p].second;
    }

    const double lr = cosine_lr(epoch, config.schedule);
    const double temperature = anneal_temp(epoch, config.schedule);
    double loss_sum = 0.0;
    long long loss_count = 0;
    const auto total = epoch_pairs.size();
    int batch_index = 0;
    for (std::size_t start = 0; start < total; start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t end = std::min(total, start + static_cast<std::size_t>(config.batch_size));
      if (end - start < 2) break;  // InfoNCE needs at least one in-batch negative
      const Matrix anchors = gather_rows(world.embeddings, anchor_ids, start, end);
      const Matrix targets = gather_rows(world.embeddings, target_ids, start, end);
      const double loss = model.train_step(anchors, targets, temperature, lr);
      if (!std::isfinite(loss))
        throw NumericError("training aborted: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      loss_sum += loss * static_cast<double>(end - start);
      loss_count += static_cast<long long>(end - start);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(loss_count));
  }
  report.final_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

}  // namespace pam
