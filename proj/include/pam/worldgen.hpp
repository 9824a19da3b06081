#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pam/matrix.hpp"
#include "pam/rng.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Synthetic room/object world and its trajectory experience stream.
// ---------------------------------------------------------------------------

struct WorldConfig {
  int embed_dim = 128;
  int n_rooms = 20;
  double room_scale = 2.0;
  int n_objects = 50;
  int objects_per_room = 5;
  int n_shared_objects = 10;  // objects assigned to two rooms
  double object_scale = 1.5;
  int n_trajectories = 500;
  int trajectory_len = 100;
  int room_dwell_mean = 12;  // timesteps between room transitions
  double state_noise_sigma = 0.5;
  std::uint64_t seed = 42;

  void validate() const {
    if (embed_dim <= 0) throw ConfigError("world config: embed_dim > 0 violated");
    if (n_rooms <= 0) throw ConfigError("world config: n_rooms must be positive");
    if (!(room_scale > 0.0)) throw ConfigError("world config: room_scale must be > 0");
    if (n_objects <= 0) throw ConfigError("world config: n_objects must be positive");
    if (objects_per_room <= 0) throw ConfigError("world config: objects_per_room must be positive");
    if (n_shared_objects < 0) throw ConfigError("world config: n_shared_objects must be non-negative");
    if (n_shared_objects > n_objects) throw ConfigError("world config: n_shared_objects exceeds n_objects");
    if (n_shared_objects > 0 && n_rooms < 2)
      throw ConfigError("world config: shared objects need at least two rooms");
    if (!(object_scale > 0.0)) throw ConfigError("world config: object_scale must be > 0");
    if (n_trajectories <= 0) throw ConfigError("world config: n_trajectories must be positive");
    if (trajectory_len <= 1) throw ConfigError("world config: trajectory_len > 1 violated");
    if (room_dwell_mean <= 0) throw ConfigError("world config: room_dwell_mean must be positive");
    if (state_noise_sigma < 0.0) throw ConfigError("world config: state_noise_sigma must be >= 0");
    if (static_cast<long long>(objects_per_room) * n_rooms < n_objects - n_shared_objects)
      throw ConfigError(
          "world config: objects_per_room * n_rooms >= n_objects - n_shared_objects violated "
          "(every object needs at least one room)");
  }
};

struct StateRecord {
  int state_id = 0;  // dense, equals trajectory_id * trajectory_len + timestep
  int trajectory_id = 0;
  int timestep = 0;
  int room_id = 0;
  std::vector<int> objects_present;  // sorted; exactly the room's object set
};

struct World {
  WorldConfig config;
  Matrix room_centroids;   // n_rooms x embed_dim
  Matrix object_features;  // n_objects x embed_dim
  std::map<int, std::set<int>> object_rooms;
  std::vector<StateRecord> states;
  Matrix embeddings;  // n_states x embed_dim; row index is the state_id

  int state_count() const { return static_cast<int>(states.size()); }
  const double* embedding(int state_id) const { return embeddings.row(state_id); }
};

inline int state_count(const World& world) { return world.state_count(); }

namespace worldgen_detail {

// RNG substream ids. Each trajectory owns stream kTrajectoryBase + id, which
// is what makes parallel generation identical to sequential generation.
enum Stream : std::uint64_t {
  kRoomCentroids = 0,
  kObjectFeatures = 1,
  kObjectRooms = 2,
  kTrajectoryBase = 16,
};

inline void fill_gaussian_matrix(Matrix& m, Rng& rng, double scale) {
  for (double& v : m.data) v = scale * rng.next_gaussian();
}

// uniform room other than `current`
inline int draw_other_room(Rng& rng, int n_rooms, int current) {
  const int r = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_rooms - 1)));
  return r >= current ? r + 1 : r;
}

}  // namespace worldgen_detail

// Deterministic function of the config (seed included). Room centroids and
// object features are i.i.d. standard normal per dimension, scaled. Each
// trajectory is a room-level random walk: per-step transition probability
// 1/room_dwell_mean (geometric dwell), next room uniform over the others.
// State embedding = room centroid + mean of present-object features +
// N(0, sigma^2) noise; present objects are the room's full object set.
inline World gen_world(const WorldConfig& config) {
  config.validate();
  using namespace worldgen_detail;

  World world;
  world.config = config;

  world.room_centroids = Matrix(config.n_rooms, config.embed_dim);
  {
    Rng rng(config.seed, kRoomCentroids);
    fill_gaussian_matrix(world.room_centroids, rng, config.room_scale);
  }
  world.object_features = Matrix(config.n_objects, config.embed_dim);
  {
    Rng rng(config.seed, kObjectFeatures);
    fill_gaussian_matrix(world.object_features, rng, config.object_scale);
  }

  // Objects [0, n_exclusive) are dealt round-robin, one room each; the last
  // n_shared_objects ids each draw two distinct rooms.
  const int n_exclusive = config.n_objects - config.n_shared_objects;
  for (int obj = 0; obj < n_exclusive; ++obj) world.object_rooms[obj] = {obj % config.n_rooms};
  {
    Rng rng(config.seed, kObjectRooms);
    for (int obj = n_exclusive; obj < config.n_objects; ++obj) {
      const int first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.n_rooms)));
      const int second = draw_other_room(rng, config.n_rooms, first);
      world.object_rooms[obj] = {first, second};
    }
  }

  // Per-room object sets and mean feature vectors.
  std::vector<std::vector<int>> room_objects(static_cast<std::size_t>(config.n_rooms));
  for (const auto& [obj, rooms] : world.object_rooms)
    for (int room : rooms) room_objects[static_cast<std::size_t>(room)].push_back(obj);
  Matrix room_object_mean(config.n_rooms, config.embed_dim);
  for (int room = 0; room < config.n_rooms; ++room) {
    auto& objs = room_objects[static_cast<std::size_t>(room)];
    std::sort(objs.begin(), objs.end());
    if (objs.empty()) continue;
    double* mean = room_object_mean.row(room);
    for (int obj : objs) {
      const double* feat = world.object_features.row(obj);
      for (int j = 0; j < config.embed_dim; ++j) mean[j] += feat[j];
    }
    for (int j = 0; j < config.embed_dim; ++j) mean[j] /= static_cast<double>(objs.size());
  }

  const int n_states = config.n_trajectories * config.trajectory_len;
  world.states.resize(static_cast<std::size_t>(n_states));
  world.embeddings = Matrix(n_states, config.embed_dim);

  const double transition_prob = config.n_rooms > 1 ? 1.0 / config.room_dwell_mean : 0.0;
  parallel_for(config.n_trajectories, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t traj = begin; traj < end; ++traj) {
      Rng rng(config.seed, kTrajectoryBase + static_cast<std::uint64_t>(traj));
      int room = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.n_rooms)));
      for (int t = 0; t < config.trajectory_len; ++t) {
        if (t > 0 && config.n_rooms > 1 && rng.next_double() < transition_prob)
          room = draw_other_room(rng, config.n_rooms, room);
        const int state_id = static_cast<int>(traj) * config.trajectory_len + t;
        StateRecord& record = world.states[static_cast<std::size_t>(state_id)];
        record.state_id = state_id;
        record.trajectory_id = static_cast<int>(traj);
        record.timestep = t;
        record.room_id = room;
        record.objects_present = room_objects[static_cast<std::size_t>(room)];
        const double* centroid = world.room_centroids.row(room);
        const double* obj_mean = room_object_mean.row(room);
        double* embedding = world.embeddings.row(state_id);
        for (int j = 0; j < config.embed_dim; ++j)
          embedding[j] = centroid[j] + obj_mean[j] + config.state_noise_sigma * rng.next_gaussian();
      }
    }
  });
  return world;
}

}  // namespace pam
