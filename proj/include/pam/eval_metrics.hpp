#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pam/assoc_graph.hpp"
#include "pam/baselines.hpp"
#include "pam/predictor.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Evaluation configuration. All query selections and negative subsamples are
// driven by query_seed substreams, so a report is a pure function of
// (world, graph, models, config).
// ---------------------------------------------------------------------------

struct EvalConfig {
  std::vector<int> k_values = {1, 5, 20};
  int n_queries_precision = 500;
  int min_assoc_precision = 3;
  int n_queries_cbr = 500;
  int min_cross_assoc_cbr = 3;
  int n_queries_auc = 300;
  int min_assoc_auc = 5;
  int auc_negative_cap = 2000;
  int min_cross_assoc_auc = 3;
  int n_queries_spec = 300;
  int min_cross_assoc_spec = 3;
  std::uint64_t query_seed = 42;
  std::vector<int> hop_depths = {1, 2, 3};
  int hop_beam = 5;
  int hop_k = 20;
  double recency_lambda = 1.0;
  std::vector<double> recency_grid = {0.5, 1.0, 2.0, 4.0};
  int recency_k = 20;

  void validate() const {
    if (k_values.empty() || !std::is_sorted(k_values.begin(), k_values.end()))
      throw ConfigError("eval config: k_values must be sorted ascending");
    for (int k : k_values)
      if (k < 1) throw ConfigError("eval config: k values must be >= 1");
    if (n_queries_precision <= 0 || n_queries_cbr <= 0 || n_queries_auc <= 0 || n_queries_spec <= 0)
      throw ConfigError("eval config: query counts must be positive");
    if (auc_negative_cap <= 0) throw ConfigError("eval config: auc_negative_cap must be positive");
    if (hop_beam < 1 || hop_k < 1) throw ConfigError("eval config: hop beam and k must be >= 1");
    if (recency_lambda < 0.0) throw ConfigError("eval config: recency_lambda must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Query selection.
// ---------------------------------------------------------------------------

struct QueryCriterion {
  enum class Kind { kMinAssoc, kMinCrossAssoc } kind = Kind::kMinAssoc;
  int threshold = 3;

  static QueryCriterion min_assoc(int m) { return {Kind::kMinAssoc, m}; }
  static QueryCriterion min_cross_assoc(int m) { return {Kind::kMinCrossAssoc, m}; }
};

struct QuerySelection {
  std::vector<int> ids;      // sorted
  int requested = 0;
  long long qualifying = 0;  // size of the qualifying pool (shortfall visible when < requested)
};

inline bool query_qualifies(const AssociationGraph& graph, int state, const QueryCriterion& criterion) {
  if (criterion.kind == QueryCriterion::Kind::kMinAssoc)
    return static_cast<int>(graph.associates(state).size()) >= criterion.threshold;
  const int room = graph.state_room[static_cast<std::size_t>(state)];
  int count = 0;
  for (int nbr : graph.associates(state))
    if (graph.state_room[static_cast<std::size_t>(nbr)] != room && ++count >= criterion.threshold) return true;
  return false;
}

inline QuerySelection select_queries(const AssociationGraph& graph, const QueryCriterion& criterion, int n,
                                     std::uint64_t seed, std::uint64_t stream = 0) {
  QuerySelection selection;
  selection.requested = n;
  std::vector<int> qualifying;
  for (int state = 0; state < graph.n_states; ++state)
    if (query_qualifies(graph, state, criterion)) qualifying.push_back(state);
  selection.qualifying = static_cast<long long>(qualifying.size());
  if (static_cast<std::size_t>(n) >= qualifying.size()) {
    selection.ids = std::move(qualifying);
    return selection;
  }
  Rng rng(seed, stream);
  for (std::size_t idx : rng.sample_without_replacement(qualifying.size(), static_cast<std::size_t>(n)))
    selection.ids.push_back(qualifying[idx]);
  std::sort(selection.ids.begin(), selection.ids.end());
  return selection;
}

// ---------------------------------------------------------------------------
// Ranking. Descending score; ties broken by ascending state id; excluded ids
// (always at least the query itself) removed before ranking.
// ---------------------------------------------------------------------------

inline bool ranks_before(const std::vector<double>& scores, int a, int b) {
  const double sa = scores[static_cast<std::size_t>(a)];
  const double sb = scores[static_cast<std::size_t>(b)];
  return sa != sb ? sa > sb : a < b;
}

inline std::vector<int> rank_memory(const std::vector<double>& scores, const std::set<int>& exclude) {
  std::vector<int> ids;
  ids.reserve(scores.size());
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (!exclude.count(i)) ids.push_back(i);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) { return ranks_before(scores, a, b); });
  return ids;
}

inline std::vector<int> top_k_ranked(const std::vector<double>& scores, int k, const std::set<int>& exclude) {
  std::vector<int> ids;
  ids.reserve(scores.size());
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (!exclude.count(i)) ids.push_back(i);
  const auto cut = ids.begin() + std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), cut, ids.end(), [&](int a, int b) { return ranks_before(scores, a, b); });
  ids.erase(cut, ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// Per-query metrics; macro-averaging is the caller's job.
// ---------------------------------------------------------------------------

inline double ap_at_k(const std::vector<int>& ranked, const std::vector<int>& associates, int k) {
  const int depth = std::min<int>(k, static_cast<int>(ranked.size()));
  int hits = 0;
  for (int r = 0; r < depth; ++r)
    if (std::binary_search(associates.begin(), associates.end(), ranked[static_cast<std::size_t>(r)])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline double cbr_at_k(const std::vector<int>& ranked, const std::vector<int>& cross_room_associates, int k) {
  const int depth = std::min<int>(k, static_cast<int>(ranked.size()));
  int hits = 0;
  for (int r = 0; r < depth; ++r)
    if (std::binary_search(cross_room_associates.begin(), cross_room_associates.end(),
                           ranked[static_cast<std::size_t>(r)]))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(cross_room_associates.size());
}

// Wilcoxon-Mann-Whitney U normalised by n+ * n-; ties count half.
inline double discrimination_auc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
  if (scores_pos.empty() || scores_neg.empty())
    throw NumericError("discrimination_auc: both score sets must be non-empty");
  double u = 0.0;
  for (double p : scores_pos)
    for (double n : scores_neg) {
      if (p > n)
        u += 1.0;
      else if (p == n)
        u += 0.5;
    }
  return u / (static_cast<double>(scores_pos.size()) * static_cast<double>(scores_neg.size()));
}

// Spec@k = h_true / (h_true + h_dist); empty denominator means the query is
// excluded from the macro-average.
inline std::optional<double> specificity_at_k(const std::vector<int>& ranked,
                                              const std::vector<int>& cross_room_associates,
                                              const std::vector<int>& category_distractors, int k) {
  const int depth = std::min<int>(k, static_cast<int>(ranked.size()));
  int h_true = 0;
  int h_dist = 0;
  for (int r = 0; r < depth; ++r) {
    const int id = ranked[static_cast<std::size_t>(r)];
    if (std::binary_search(cross_room_associates.begin(), cross_room_associates.end(), id))
      ++h_true;
    else if (std::binary_search(category_distractors.begin(), category_distractors.end(), id))
      ++h_dist;
  }
  if (h_true + h_dist == 0) return std::nullopt;
  return static_cast<double>(h_true) / static_cast<double>(h_true + h_dist);
}

// ---------------------------------------------------------------------------
// Scorers: a retrieval method is a function from a stored state to scores
// over the whole memory bank.
// ---------------------------------------------------------------------------

struct Scorer {
  std::string name;
  bool trained = false;
  std::function<std::vector<double>(int)> score_state;
};

namespace eval_detail {

inline Matrix normalized_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const double norm = l2_norm(m.row(i), m.cols);
    const double inv = norm < kZeroNormFloor ? 0.0 : 1.0 / norm;
    const double* src = m.row(i);
    double* dst = out.row(i);
    for (int j = 0; j < m.cols; ++j) dst[j] = src[j] * inv;
  }
  return out;
}

inline std::vector<double> dot_all_rows(const Matrix& memory, const std::vector<double>& v) {
  std::vector<double> scores(static_cast<std::size_t>(memory.rows));
  parallel_for(memory.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i)
      scores[static_cast<std::size_t>(i)] = dot(memory.row(static_cast<int>(i)), v.data(), memory.cols);
  });
  return scores;
}

}  // namespace eval_detail

inline Scorer make_cosine_scorer(const World& world) {
  auto memory_unit = std::make_shared<Matrix>(eval_detail::normalized_rows(world.embeddings));
  const Matrix* embeddings = &world.embeddings;
  const int dim = world.config.embed_dim;
  return {"cosine", false, [memory_unit, embeddings, dim](int state) {
            std::vector<double> q(embeddings->row(state), embeddings->row(state) + dim);
            const double norm = l2_norm(q.data(), dim);
            if (norm < kZeroNormFloor) throw NumericError("cosine scorer: zero-norm query");
            for (double& v : q) v /= norm;
            return eval_detail::dot_all_rows(*memory_unit, q);
          }};
}

// Retrieval scoring for the predictor: cosine between the predicted point
// and every stored embedding.
inline Scorer make_predictor_scorer(const World& world, const MlpParams& params) {
  auto memory_unit = std::make_shared<Matrix>(eval_detail::normalized_rows(world.embeddings));
  auto params_copy = std::make_shared<MlpParams>(params);
  const World* w = &world;
  const int dim = world.config.embed_dim;
  return {"predictor", true, [memory_unit, params_copy, w, dim](int state) {
            std::vector<double> z = predict_point(*params_copy, state, *w);
            const double norm = l2_norm(z.data(), dim);
            if (norm < kZeroNormFloor) throw NumericError("predictor scorer: zero-norm prediction");
            for (double& v : z) v /= norm;
            return eval_detail::dot_all_rows(*memory_unit, z);
          }};
}

inline Scorer make_bilinear_scorer(const World& world, const BilinearParams& params) {
  auto params_copy = std::make_shared<BilinearParams>(params);
  const World* w = &world;
  const int dim = world.config.embed_dim;
  return {"bilinear", true, [params_copy, w, dim](int state) {
            std::vector<double> q(w->embedding(state), w->embedding(state) + dim);
            return bilinear_scores(*params_copy, q, w->embeddings);
          }};
}

// ---------------------------------------------------------------------------
// Multi-hop transitive recall. Hop 1 retrieves from the query's prediction;
// each further hop predicts from the previous hop's top-`beam` states,
// aggregates candidates by best score, and never revisits prior anchors.
// Targets at depth h are the cross-room states at graph distance exactly h.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<int>> states_at_exact_depths(const AssociationGraph& graph, int query,
                                                            int max_depth) {
  std::vector<int> dist(static_cast<std::size_t>(graph.n_states), -1);
  std::vector<std::vector<int>> by_depth(static_cast<std::size_t>(max_depth) + 1);
  dist[static_cast<std::size_t>(query)] = 0;
  std::vector<int> frontier = {query};
  for (int d = 1; d <= max_depth && !frontier.empty(); ++d) {
    std::vector<int> next;
    for (int node : frontier)
      for (int nbr : graph.associates(node))
        if (dist[static_cast<std::size_t>(nbr)] < 0) {
          dist[static_cast<std::size_t>(nbr)] = d;
          next.push_back(nbr);
        }
    std::sort(next.begin(), next.end());
    frontier = next;
    by_depth[static_cast<std::size_t>(d)] = std::move(next);
  }
  return by_depth;
}

// Returns recall@k per depth for one query; entries without targets are nullopt.
inline std::vector<std::optional<double>> multi_hop_recall_single(const Scorer& scorer,
                                                                  const AssociationGraph& graph, int query,
                                                                  int max_depth, int k, int beam) {
  const auto by_depth = states_at_exact_depths(graph, query, max_depth);
  const int query_room = graph.state_room[static_cast<std::size_t>(query)];

  std::vector<std::optional<double>> recalls(static_cast<std::size_t>(max_depth));
  std::set<int> visited = {query};
  std::vector<int> beam_states;
  std::vector<double> best_score;  // best over all predictions so far this hop chain

  for (int depth = 1; depth <= max_depth; ++depth) {
    if (depth == 1) {
      best_score = scorer.score_state(query);
    } else {
      std::vector<double> combined(best_score.size(), -std::numeric_limits<double>::infinity());
      for (int b : beam_states) {
        const auto scores = scorer.score_state(b);
        for (std::size_t m = 0; m < scores.size(); ++m) combined[m] = std::max(combined[m], scores[m]);
      }
      best_score = std::move(combined);
    }
    const auto retrieved = top_k_ranked(best_score, k, visited);
    const auto next_beam = top_k_ranked(best_score, beam, visited);

    std::vector<int> targets;
    for (int s : by_depth[static_cast<std::size_t>(depth)])
      if (graph.state_room[static_cast<std::size_t>(s)] != query_room) targets.push_back(s);
    if (!targets.empty()) {
      int hits = 0;
      for (int id : retrieved)
        if (std::binary_search(targets.begin(), targets.end(), id)) ++hits;
      recalls[static_cast<std::size_t>(depth - 1)] = static_cast<double>(hits) / static_cast<double>(targets.size());
    }
    beam_states = next_beam;
    for (int b : beam_states) visited.insert(b);
    if (beam_states.empty()) break;
  }
  return recalls;
}

inline std::map<int, double> multi_hop_recall(const Scorer& scorer, const AssociationGraph& graph,
                                              const std::vector<int>& queries, int max_depth, int k, int beam) {
  std::vector<double> sums(static_cast<std::size_t>(max_depth), 0.0);
  std::vector<long long> counts(static_cast<std::size_t>(max_depth), 0);
  for (int q : queries) {
    const auto recalls = multi_hop_recall_single(scorer, graph, q, max_depth, k, beam);
    for (int d = 0; d < max_depth; ++d)
      if (recalls[static_cast<std::size_t>(d)]) {
        sums[static_cast<std::size_t>(d)] += *recalls[static_cast<std::size_t>(d)];
        ++counts[static_cast<std::size_t>(d)];
      }
  }
  std::map<int, double> per_depth;
  for (int d = 1; d <= max_depth; ++d)
    per_depth[d] = counts[static_cast<std::size_t>(d - 1)] > 0
                       ? sums[static_cast<std::size_t>(d - 1)] / static_cast<double>(counts[static_cast<std::size_t>(d - 1)])
                       : 0.0;
  return per_depth;
}

// ---------------------------------------------------------------------------
// Recency-weighted retrieval: candidate scores multiplied by exp(-lambda*age),
// age = (latest global timestamp - state timestamp) / total timestamps, with
// the global timestamp being the dense state id.
// ---------------------------------------------------------------------------

inline std::vector<double> recency_weights(int n_states, double decay_lambda) {
  std::vector<double> weights(static_cast<std::size_t>(n_states));
  for (int m = 0; m < n_states; ++m) {
    const double age = static_cast<double>(n_states - 1 - m) / static_cast<double>(n_states);
    weights[static_cast<std::size_t>(m)] = std::exp(-decay_lambda * age);
  }
  return weights;
}

// (weighted AP@k, uniform AP@k) macro-averaged over the given queries
inline std::pair<double, double> recency_weighted_precision(const Scorer& scorer, const AssociationGraph& graph,
                                                            const std::vector<int>& queries, double decay_lambda,
                                                            int k) {
  if (decay_lambda < 0.0) throw ConfigError("recency_weighted_precision: lambda must be >= 0");
  const auto weights = recency_weights(graph.n_states, decay_lambda);
  double weighted_sum = 0.0;
  double uniform_sum = 0.0;
  for (int q : queries) {
    const auto scores = scorer.score_state(q);
    std::vector<double> weighted(scores.size());
    for (std::size_t m = 0; m < scores.size(); ++m) weighted[m] = scores[m] * weights[m];
    const auto& associates = graph.associates(q);
    uniform_sum += ap_at_k(top_k_ranked(scores, k, {q}), associates, k);
    weighted_sum += ap_at_k(top_k_ranked(weighted, k, {q}), associates, k);
  }
  const double denom = queries.empty() ? 1.0 : static_cast<double>(queries.size());
  return {weighted_sum / denom, uniform_sum / denom};
}

// ---------------------------------------------------------------------------
// Full per-method evaluation.
// ---------------------------------------------------------------------------

struct RecencyMetrics {
  double best_lambda = 0.0;
  double weighted = 0.0;
  double uniform = 0.0;
  std::map<double, std::pair<double, double>> grid;  // lambda -> (weighted, uniform)
};

struct MethodMetrics {
  std::map<int, double> ap;    // k -> AP@k
  std::map<int, double> cbr;   // k -> CBR@k
  std::map<int, double> spec;  // k -> Spec@k
  double auc_overall = 0.0;
  double auc_cross_room = 0.0;
  int n_auc_cross_queries = 0;
  std::map<int, double> hop_recall;  // depth -> cross-room R@hop_k
  RecencyMetrics recency;
  bool trained = false;

  std::map<std::string, double> flatten() const {
    std::map<std::string, double> flat;
    for (const auto& [k, v] : ap) flat["ap@" + std::to_string(k)] = v;
    for (const auto& [k, v] : cbr) flat["cbr@" + std::to_string(k)] = v;
    for (const auto& [k, v] : spec) flat["spec@" + std::to_string(k)] = v;
    flat["auc_overall"] = auc_overall;
    flat["auc_cross_room"] = auc_cross_room;
    for (const auto& [d, v] : hop_recall) flat["hop" + std::to_string(d) + "_r@20"] = v;
    flat["recency_weighted"] = recency.weighted;
    flat["recency_uniform"] = recency.uniform;
    return flat;
  }
};

struct QuerySetInfo {
  int requested = 0;
  long long qualifying = 0;
  int used = 0;
};

struct MetricsReport {
  std::map<std::string, MethodMetrics> methods;
  std::uint64_t query_seed = 0;
  std::map<std::string, QuerySetInfo> query_sets;
};

namespace eval_detail {

// query_seed substreams
inline constexpr std::uint64_t kPrecisionStream = 1;
inline constexpr std::uint64_t kCbrStream = 2;
inline constexpr std::uint64_t kAucStream = 3;
inline constexpr std::uint64_t kSpecStream = 4;
inline constexpr std::uint64_t kNegOverallBase = 1u << 24;
inline constexpr std::uint64_t kNegCrossBase = 1u << 25;

inline std::vector<int> same_room_non_associates(const AssociationGraph& graph, int query) {
  const int room = graph.state_room[static_cast<std::size_t>(query)];
  std::vector<int> out;
  for (int s = 0; s < graph.n_states; ++s) {
    if (s == query || graph.state_room[static_cast<std::size_t>(s)] != room) continue;
    if (!graph.are_associated(query, s)) out.push_back(s);
  }
  return out;
}

// deterministic per-query subsample to the cap
inline std::vector<int> cap_negatives(std::vector<int> negatives, int cap, std::uint64_t seed,
                                      std::uint64_t stream) {
  if (static_cast<int>(negatives.size()) <= cap) return negatives;
  Rng rng(seed, stream);
  auto picks = rng.sample_without_replacement(negatives.size(), static_cast<std::size_t>(cap));
  std::vector<int> out;
  out.reserve(picks.size());
  for (std::size_t idx : picks) out.push_back(negatives[idx]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace eval_detail

inline MethodMetrics evaluate_method(const Scorer& scorer, const AssociationGraph& graph, const EvalConfig& config,
                                     const QuerySelection& precision_queries, const QuerySelection& cbr_queries,
                                     const QuerySelection& auc_queries, const QuerySelection& spec_queries) {
  MethodMetrics metrics;
  metrics.trained = scorer.trained;
  const int max_k = std::max(config.k_values.back(), config.recency_k);

  // AP@k and the recency grid share the precision query set; each query is
  // scored once. The configured lambda always participates in the grid.
  std::vector<double> lambdas = config.recency_grid;
  if (std::find(lambdas.begin(), lambdas.end(), config.recency_lambda) == lambdas.end())
    lambdas.push_back(config.recency_lambda);
  std::vector<std::vector<double>> lambda_weights;
  for (double lam : lambdas) lambda_weights.push_back(recency_weights(graph.n_states, lam));
  std::vector<double> weighted_sums(lambdas.size(), 0.0);
  double uniform_sum = 0.0;
  for (int k : config.k_values) metrics.ap[k] = 0.0;
  for (int q : precision_queries.ids) {
    const auto scores = scorer.score_state(q);
    const auto& associates = graph.associates(q);
    const auto ranked = top_k_ranked(scores, max_k, {q});
    for (int k : config.k_values) metrics.ap[k] += ap_at_k(ranked, associates, k);
    uniform_sum += ap_at_k(ranked, associates, config.recency_k);
    std::vector<double> weighted(scores.size());
    for (std::size_t lam = 0; lam < lambdas.size(); ++lam) {
      for (std::size_t m = 0; m < scores.size(); ++m) weighted[m] = scores[m] * lambda_weights[lam][m];
      weighted_sums[lam] += ap_at_k(top_k_ranked(weighted, config.recency_k, {q}), associates, config.recency_k);
    }
  }
  const double n_precision = precision_queries.ids.empty() ? 1.0 : static_cast<double>(precision_queries.ids.size());
  for (int k : config.k_values) metrics.ap[k] /= n_precision;

  RecencyMetrics recency;
  double best_weighted = -1.0;
  const double uniform = uniform_sum / n_precision;
  for (std::size_t lam = 0; lam < lambdas.size(); ++lam) {
    const double weighted = weighted_sums[lam] / n_precision;
    recency.grid[lambdas[lam]] = {weighted, uniform};
    if (weighted > best_weighted) {
      best_weighted = weighted;
      recency.best_lambda = lambdas[lam];
      recency.weighted = weighted;
      recency.uniform = uniform;
    }
  }
  metrics.recency = recency;

  // CBR@k over the cross-association query set.
  for (int k : config.k_values) metrics.cbr[k] = 0.0;
  for (int q : cbr_queries.ids) {
    const auto scores = scorer.score_state(q);
    const auto ranked = top_k_ranked(scores, max_k, {q});
    const auto cross = graph.cross_room_associates(q);
    for (int k : config.k_values) metrics.cbr[k] += cbr_at_k(ranked, cross, k);
  }
  for (int k : config.k_values)
    metrics.cbr[k] /= cbr_queries.ids.empty() ? 1.0 : static_cast<double>(cbr_queries.ids.size());

  // Discrimination AUC, overall and cross-room.
  double auc_sum = 0.0;
  double auc_cross_sum = 0.0;
  int auc_cross_count = 0;
  for (int q : auc_queries.ids) {
    const auto scores = scorer.score_state(q);
    const auto& associates = graph.associates(q);
    std::vector<double> pos;
    pos.reserve(associates.size());
    for (int a : associates) pos.push_back(scores[static_cast<std::size_t>(a)]);

    std::vector<int> negatives;
    negatives.reserve(static_cast<std::size_t>(graph.n_states));
    for (int s = 0; s < graph.n_states; ++s)
      if (s != q && !std::binary_search(associates.begin(), associates.end(), s)) negatives.push_back(s);
    negatives = eval_detail::cap_negatives(std::move(negatives), config.auc_negative_cap, config.query_seed,
                                           eval_detail::kNegOverallBase + static_cast<std::uint64_t>(q));
    std::vector<double> neg;
    neg.reserve(negatives.size());
    for (int s : negatives) neg.push_back(scores[static_cast<std::size_t>(s)]);
    auc_sum += discrimination_auc(pos, neg);

    const auto cross = graph.cross_room_associates(q);
    if (static_cast<int>(cross.size()) >= config.min_cross_assoc_auc) {
      const int room = graph.state_room[static_cast<std::size_t>(q)];
      std::vector<double> cross_pos;
      cross_pos.reserve(cross.size());
      for (int a : cross) cross_pos.push_back(scores[static_cast<std::size_t>(a)]);
      std::vector<int> cross_negatives;
      for (int s = 0; s < graph.n_states; ++s) {
        if (s == q || graph.state_room[static_cast<std::size_t>(s)] == room) continue;
        if (!std::binary_search(associates.begin(), associates.end(), s)) cross_negatives.push_back(s);
      }
      cross_negatives =
          eval_detail::cap_negatives(std::move(cross_negatives), config.auc_negative_cap, config.query_seed,
                                     eval_detail::kNegCrossBase + static_cast<std::uint64_t>(q));
      if (!cross_negatives.empty()) {
        std::vector<double> cross_neg;
        cross_neg.reserve(cross_negatives.size());
        for (int s : cross_negatives) cross_neg.push_back(scores[static_cast<std::size_t>(s)]);
        auc_cross_sum += discrimination_auc(cross_pos, cross_neg);
        ++auc_cross_count;
      }
    }
  }
  metrics.auc_overall = auc_queries.ids.empty() ? 0.0 : auc_sum / static_cast<double>(auc_queries.ids.size());
  metrics.auc_cross_room = auc_cross_count > 0 ? auc_cross_sum / auc_cross_count : 0.0;
  metrics.n_auc_cross_queries = auc_cross_count;

  // Specificity@k; queries with empty denominators are excluded per k.
  std::map<int, double> spec_sum;
  std::map<int, int> spec_count;
  for (int q : spec_queries.ids) {
    const auto scores = scorer.score_state(q);
    const auto ranked = top_k_ranked(scores, max_k, {q});
    const auto cross = graph.cross_room_associates(q);
    const auto distractors = eval_detail::same_room_non_associates(graph, q);
    for (int k : config.k_values) {
      const auto value = specificity_at_k(ranked, cross, distractors, k);
      if (value) {
        spec_sum[k] += *value;
        ++spec_count[k];
      }
    }
  }
  for (int k : config.k_values)
    metrics.spec[k] = spec_count[k] > 0 ? spec_sum[k] / static_cast<double>(spec_count[k]) : 0.0;

  // Multi-hop transitive recall over the CBR query set.
  if (!config.hop_depths.empty()) {
    const int max_depth = *std::max_element(config.hop_depths.begin(), config.hop_depths.end());
    const auto per_depth = multi_hop_recall(scorer, graph, cbr_queries.ids, max_depth, config.hop_k, config.hop_beam);
    for (int d : config.hop_depths) metrics.hop_recall[d] = per_depth.at(d);
  }
  return metrics;
}

inline MetricsReport evaluate_scorers(const std::vector<Scorer>& scorers, const AssociationGraph& graph,
                                      const EvalConfig& config) {
  config.validate();
  MetricsReport report;
  report.query_seed = config.query_seed;

  const auto precision_queries =
      select_queries(graph, QueryCriterion::min_assoc(config.min_assoc_precision), config.n_queries_precision,
                     config.query_seed, eval_detail::kPrecisionStream);
  const auto cbr_queries =
      select_queries(graph, QueryCriterion::min_cross_assoc(config.min_cross_assoc_cbr), config.n_queries_cbr,
                     config.query_seed, eval_detail::kCbrStream);
  const auto auc_queries = select_queries(graph, QueryCriterion::min_assoc(config.min_assoc_auc),
                                          config.n_queries_auc, config.query_seed, eval_detail::kAucStream);
  const auto spec_queries =
      select_queries(graph, QueryCriterion::min_cross_assoc(config.min_cross_assoc_spec), config.n_queries_spec,
                     config.query_seed, eval_detail::kSpecStream);

  auto info = [](const QuerySelection& s) {
    return QuerySetInfo{s.requested, s.qualifying, static_cast<int>(s.ids.size())};
  };
  report.query_sets["precision"] = info(precision_queries);
  report.query_sets["cbr"] = info(cbr_queries);
  report.query_sets["auc"] = info(auc_queries);
  report.query_sets["specificity"] = info(spec_queries);

  for (const Scorer& scorer : scorers)
    report.methods[scorer.name] =
        evaluate_method(scorer, graph, config, precision_queries, cbr_queries, auc_queries, spec_queries);
  return report;
}

}  // namespace pam
