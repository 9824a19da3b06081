#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pam/rng.hpp"
#include "pam/worldgen.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Temporal co-occurrence association graph. Edges are unordered, deduplicated
// state-id pairs; (i, j) is an edge iff both states belong to the same
// trajectory and 0 < |timestep_i - timestep_j| <= tau.
// ---------------------------------------------------------------------------

struct Edge {
  int i = 0;  // i < j always
  int j = 0;
  bool cross_room = false;

  bool operator==(const Edge& other) const { return i == other.i && j == other.j; }
  bool operator<(const Edge& other) const { return i != other.i ? i < other.i : j < other.j; }
};

struct AssociationGraph {
  int tau = 0;
  int n_states = 0;
  std::vector<Edge> edges;                 // canonical ascending (i, j) order
  std::vector<std::vector<int>> adjacency; // symmetric, sorted, no self-edges
  std::vector<int> state_room;             // room id per state
  std::vector<int> state_traj;             // trajectory id per state

  std::size_t edge_count() const { return edges.size(); }

  bool are_associated(int a, int b) const {
    const auto& nbrs = adjacency[static_cast<std::size_t>(a)];
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
  }

  const std::vector<int>& associates(int state) const { return adjacency[static_cast<std::size_t>(state)]; }

  std::vector<int> cross_room_associates(int state) const {
    std::vector<int> out;
    const int room = state_room[static_cast<std::size_t>(state)];
    for (int nbr : adjacency[static_cast<std::size_t>(state)])
      if (state_room[static_cast<std::size_t>(nbr)] != room) out.push_back(nbr);
    return out;
  }
};

namespace graph_detail {

inline void rebuild_adjacency(AssociationGraph& graph) {
  graph.adjacency.assign(static_cast<std::size_t>(graph.n_states), {});
  for (const Edge& e : graph.edges) {
    graph.adjacency[static_cast<std::size_t>(e.i)].push_back(e.j);
    graph.adjacency[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  for (auto& nbrs : graph.adjacency) std::sort(nbrs.begin(), nbrs.end());
}

}  // namespace graph_detail

// Assembles a graph from an explicit edge list (test fixtures, audits).
// Edges are canonicalised, deduplicated, and flagged from room labels.
inline AssociationGraph graph_from_edges(int n_states, int tau, std::vector<std::pair<int, int>> raw_edges,
                                         std::vector<int> state_room, std::vector<int> state_traj) {
  AssociationGraph graph;
  graph.tau = tau;
  graph.n_states = n_states;
  graph.state_room = std::move(state_room);
  graph.state_traj = std::move(state_traj);
  for (auto& [a, b] : raw_edges) {
    if (a == b) continue;
    if (a > b) std::swap(a, b);
  }
  std::sort(raw_edges.begin(), raw_edges.end());
  raw_edges.erase(std::unique(raw_edges.begin(), raw_edges.end()), raw_edges.end());
  graph.edges.reserve(raw_edges.size());
  for (const auto& [a, b] : raw_edges)
    graph.edges.push_back({a, b, graph.state_room[static_cast<std::size_t>(a)] !=
                                     graph.state_room[static_cast<std::size_t>(b)]});
  graph_detail::rebuild_adjacency(graph);
  return graph;
}

inline AssociationGraph build_graph(const World& world, int tau) {
  if (tau < 1) throw ConfigError("build_graph: tau must be >= 1");
  AssociationGraph graph;
  graph.tau = tau;
  graph.n_states = world.state_count();
  graph.state_room.resize(static_cast<std::size_t>(graph.n_states));
  graph.state_traj.resize(static_cast<std::size_t>(graph.n_states));
  for (const StateRecord& s : world.states) {
    graph.state_room[static_cast<std::size_t>(s.state_id)] = s.room_id;
    graph.state_traj[static_cast<std::size_t>(s.state_id)] = s.trajectory_id;
  }

  const int len = world.config.trajectory_len;
  const int n_traj = world.config.n_trajectories;
  const long long per_traj =
      [&] {
        long long c = 0;
        for (int d = 1; d <= std::min(tau, len - 1); ++d) c += len - d;
        return c;
      }();
  graph.edges.resize(static_cast<std::size_t>(per_traj * n_traj));

  // One contiguous block of canonical edges per trajectory; parallel fill is
  // identical to sequential.
  parallel_for(n_traj, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t traj = begin; traj < end; ++traj) {
      std::size_t pos = static_cast<std::size_t>(traj * per_traj);
      const int base = static_cast<int>(traj) * len;
      for (int t = 0; t < len; ++t) {
        const int limit = std::min(len - 1, t + tau);
        for (int u = t + 1; u <= limit; ++u) {
          const int a = base + t;
          const int b = base + u;
          graph.edges[pos++] = {a, b,
                                graph.state_room[static_cast<std::size_t>(a)] !=
                                    graph.state_room[static_cast<std::size_t>(b)]};
        }
      }
    }
  });
  graph_detail::rebuild_adjacency(graph);
  return graph;
}

// Keeps only the edges selected by the mask (graph restricted to one side of
// an edge split); rooms and trajectories are unchanged.
inline AssociationGraph filter_graph_edges(const AssociationGraph& graph, const std::vector<std::uint8_t>& mask,
                                           bool keep_flagged) {
  AssociationGraph out;
  out.tau = graph.tau;
  out.n_states = graph.n_states;
  out.state_room = graph.state_room;
  out.state_traj = graph.state_traj;
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
    if ((mask[e] != 0) == keep_flagged) out.edges.push_back(graph.edges[e]);
  graph_detail::rebuild_adjacency(out);
  return out;
}

inline long long count_cross_trajectory_edges(const AssociationGraph& graph) {
  long long count = 0;
  for (const Edge& e : graph.edges)
    if (graph.state_traj[static_cast<std::size_t>(e.i)] != graph.state_traj[static_cast<std::size_t>(e.j)]) ++count;
  return count;
}

// ---------------------------------------------------------------------------
// Temporal shuffle control: permute the timesteps within each trajectory,
// preserving every embedding. Substream: one per trajectory under `seed`.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<int>> shuffle_permutations(int n_trajectories, int trajectory_len,
                                                          std::uint64_t seed) {
  std::vector<std::vector<int>> perms(static_cast<std::size_t>(n_trajectories));
  for (int traj = 0; traj < n_trajectories; ++traj) {
    auto& perm = perms[static_cast<std::size_t>(traj)];
    perm.resize(static_cast<std::size_t>(trajectory_len));
    for (int t = 0; t < trajectory_len; ++t) perm[static_cast<std::size_t>(t)] = t;
    Rng rng(seed, static_cast<std::uint64_t>(traj));
    rng.shuffle(perm);
  }
  return perms;
}

inline World shuffle_temporal(const World& world, std::uint64_t seed) {
  const auto perms = shuffle_permutations(world.config.n_trajectories, world.config.trajectory_len, seed);
  World shuffled;
  shuffled.config = world.config;
  shuffled.room_centroids = world.room_centroids;
  shuffled.object_features = world.object_features;
  shuffled.object_rooms = world.object_rooms;
  shuffled.states.resize(world.states.size());
  shuffled.embeddings = Matrix(world.embeddings.rows, world.embeddings.cols);
  const int len = world.config.trajectory_len;
  for (const StateRecord& s : world.states) {
    const int new_t = perms[static_cast<std::size_t>(s.trajectory_id)][static_cast<std::size_t>(s.timestep)];
    const int new_id = s.trajectory_id * len + new_t;
    StateRecord moved = s;
    moved.timestep = new_t;
    moved.state_id = new_id;
    shuffled.states[static_cast<std::size_t>(new_id)] = std::move(moved);
    const double* src = world.embeddings.row(s.state_id);
    std::copy(src, src + world.embeddings.cols, shuffled.embeddings.row(new_id));
  }
  return shuffled;
}

// Pseudo-association graph on the ORIGINAL state ids: the tau window applied
// to shuffled timesteps. Equals build_graph(shuffle_temporal(world, seed))
// with ids mapped back, so both ablation arms can share one world file.
inline AssociationGraph build_shuffled_graph(const World& world, int tau, std::uint64_t seed) {
  if (tau < 1) throw ConfigError("build_shuffled_graph: tau must be >= 1");
  const auto perms = shuffle_permutations(world.config.n_trajectories, world.config.trajectory_len, seed);
  const int len = world.config.trajectory_len;
  std::vector<std::pair<int, int>> raw;
  std::vector<int> state_room(world.states.size()), state_traj(world.states.size());
  for (const StateRecord& s : world.states) {
    state_room[static_cast<std::size_t>(s.state_id)] = s.room_id;
    state_traj[static_cast<std::size_t>(s.state_id)] = s.trajectory_id;
  }
  for (int traj = 0; traj < world.config.n_trajectories; ++traj) {
    const auto& perm = perms[static_cast<std::size_t>(traj)];
    // invert: order[p] = original timestep now sitting at shuffled position p
    std::vector<int> order(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) order[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])] = t;
    const int base = traj * len;
    for (int p = 0; p < len; ++p) {
      const int limit = std::min(len - 1, p + tau);
      for (int q = p + 1; q <= limit; ++q)
        raw.emplace_back(base + order[static_cast<std::size_t>(p)], base + order[static_cast<std::size_t>(q)]);
    }
  }
  return graph_from_edges(world.state_count(), tau, std::move(raw), std::move(state_room), std::move(state_traj));
}

// ---------------------------------------------------------------------------
// Edge-disjoint split and anchor holdout.
// ---------------------------------------------------------------------------

struct EdgeSplit {
  std::vector<std::uint8_t> in_train;  // one flag per edge index
  double fraction = 0.0;
  std::uint64_t seed = 0;
  long long train_count = 0;

  std::vector<std::size_t> train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < in_train.size(); ++e)
      if (in_train[e]) out.push_back(e);
    return out;
  }
  std::vector<std::size_t> test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < in_train.size(); ++e)
      if (!in_train[e]) out.push_back(e);
    return out;
  }
};

inline EdgeSplit split_edges(const AssociationGraph& graph, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split_edges: fraction must be in (0, 1)");
  EdgeSplit split;
  split.fraction = fraction;
  split.seed = seed;
  split.in_train.assign(graph.edges.size(), 0);
  const auto n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(graph.edges.size())));
  Rng rng(seed);
  for (std::size_t idx : rng.sample_without_replacement(graph.edges.size(), n_train)) split.in_train[idx] = 1;
  split.train_count = static_cast<long long>(n_train);
  return split;
}

struct AnchorHoldout {
  std::vector<int> held_states;  // sorted
  double fraction = 0.0;
  std::uint64_t seed = 0;

  bool is_held(int state) const {
    return std::binary_search(held_states.begin(), held_states.end(), state);
  }
};

inline AnchorHoldout holdout_anchors(const World& world, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout_anchors: fraction must be in (0, 1)");
  AnchorHoldout holdout;
  holdout.fraction = fraction;
  holdout.seed = seed;
  const auto n = static_cast<std::size_t>(world.state_count());
  const auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(n, n_held);
  holdout.held_states.reserve(picks.size());
  for (std::size_t idx : picks) holdout.held_states.push_back(static_cast<int>(idx));
  std::sort(holdout.held_states.begin(), holdout.held_states.end());
  return holdout;
}

// ---------------------------------------------------------------------------
// Familiarity-normalised association weight: the raw co-occurrence count of
// the (room_i, room_j) object-set pair in the current trajectory, minus its
// mean over the `window` immediately preceding trajectories. The current
// trajectory is the later of the two states' trajectories; it is excluded
// from its own baseline. May be negative.
// ---------------------------------------------------------------------------

inline double familiarity_normalised_weight(const AssociationGraph& graph, int state_i, int state_j, int window) {
  if (window < 1) throw ConfigError("familiarity_normalised_weight: window must be >= 1");
  const int room_a = graph.state_room[static_cast<std::size_t>(state_i)];
  const int room_b = graph.state_room[static_cast<std::size_t>(state_j)];
  const int lo = std::min(room_a, room_b);
  const int hi = std::max(room_a, room_b);

  int n_traj = 0;
  for (int t : graph.state_traj) n_traj = std::max(n_traj, t + 1);
  std::vector<long long> per_traj_count(static_cast<std::size_t>(n_traj), 0);
  for (const Edge& e : graph.edges) {
    const int ra = graph.state_room[static_cast<std::size_t>(e.i)];
    const int rb = graph.state_room[static_cast<std::size_t>(e.j)];
    if (std::min(ra, rb) == lo && std::max(ra, rb) == hi)
      ++per_traj_count[static_cast<std::size_t>(graph.state_traj[static_cast<std::size_t>(e.i)])];
  }

  const int current = std::max(graph.state_traj[static_cast<std::size_t>(state_i)],
                               graph.state_traj[static_cast<std::size_t>(state_j)]);
  const double raw = static_cast<double>(per_traj_count[static_cast<std::size_t>(current)]);
  const int first = std::max(0, current - window);
  double baseline = 0.0;
  if (current > first) {
    for (int t = first; t < current; ++t) baseline += static_cast<double>(per_traj_count[static_cast<std::size_t>(t)]);
    baseline /= static_cast<double>(current - first);
  }
  return raw - baseline;
}

}  // namespace pam
