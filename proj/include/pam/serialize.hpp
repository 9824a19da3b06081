#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pam/assoc_graph.hpp"
#include "pam/baselines.hpp"
#include "pam/predictor.hpp"
#include "pam/worldgen.hpp"

namespace pam {

// ---------------------------------------------------------------------------
// Versioned little-endian binary containers:
//   "PAMW" worlds, "PAMG" association graphs, "PAMM" predictor checkpoints,
//   "PAMB" bilinear checkpoints. Matrices are stored row-major as 32-bit
//   floats; all in-memory math stays 64-bit.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kWorldFormatVersion = 1;
inline constexpr std::uint32_t kGraphFormatVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace bin {

inline void put_bytes(std::ostream& out, const void* data, std::size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  put_bytes(out, b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void get_bytes(std::istream& in, void* data, std::size_t len) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (!in) throw IoError("unexpected end of file");
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void put_matrix_f32(std::ostream& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) put_f32(out, static_cast<float>(v));
}

inline Matrix get_matrix_f32(std::istream& in) {
  const auto rows = static_cast<int>(get_u32(in));
  const auto cols = static_cast<int>(get_u32(in));
  Matrix m(rows, cols);
  for (double& v : m.data) v = static_cast<double>(get_f32(in));
  return m;
}

inline void put_f64_vector_f32(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double x : v) put_f32(out, static_cast<float>(x));
}

inline std::vector<double> get_f64_vector_f32(std::istream& in) {
  std::vector<double> v(get_u64(in));
  for (double& x : v) x = static_cast<double>(get_f32(in));
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in) {
  std::string s(get_u64(in), '\0');
  if (!s.empty()) get_bytes(in, s.data(), s.size());
  return s;
}

inline void check_magic(std::istream& in, const char expected[4], const std::string& what) {
  char magic[4];
  get_bytes(in, magic, 4);
  if (std::memcmp(magic, expected, 4) != 0) throw IoError("not a " + what + " file (bad magic)");
}

inline void check_version(std::uint32_t found, std::uint32_t supported, const std::string& what) {
  if (found > supported)
    throw IoError(what + " format version " + std::to_string(found) + " is newer than supported version " +
                  std::to_string(supported));
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

}  // namespace bin

// --------------------------- world container -------------------------------

inline void save_world(const World& world, const std::string& path) {
  auto out = bin::open_out(path);
  bin::put_bytes(out, "PAMW", 4);
  bin::put_u32(out, kWorldFormatVersion);
  const WorldConfig& c = world.config;
  bin::put_u32(out, static_cast<std::uint32_t>(c.embed_dim));
  bin::put_u32(out, static_cast<std::uint32_t>(c.n_rooms));
  bin::put_f64(out, c.room_scale);
  bin::put_u32(out, static_cast<std::uint32_t>(c.n_objects));
  bin::put_u32(out, static_cast<std::uint32_t>(c.objects_per_room));
  bin::put_u32(out, static_cast<std::uint32_t>(c.n_shared_objects));
  bin::put_f64(out, c.object_scale);
  bin::put_u32(out, static_cast<std::uint32_t>(c.n_trajectories));
  bin::put_u32(out, static_cast<std::uint32_t>(c.trajectory_len));
  bin::put_u32(out, static_cast<std::uint32_t>(c.room_dwell_mean));
  bin::put_f64(out, c.state_noise_sigma);
  bin::put_u64(out, c.seed);

  bin::put_matrix_f32(out, world.room_centroids);
  bin::put_matrix_f32(out, world.object_features);
  bin::put_u32(out, static_cast<std::uint32_t>(world.object_rooms.size()));
  for (const auto& [obj, rooms] : world.object_rooms) {
    bin::put_u32(out, static_cast<std::uint32_t>(obj));
    bin::put_u32(out, static_cast<std::uint32_t>(rooms.size()));
    for (int room : rooms) bin::put_u32(out, static_cast<std::uint32_t>(room));
  }
  // state table: room id per dense state id; trajectory, timestep and the
  // object set are implied by the dense ordering and the room
  bin::put_u64(out, static_cast<std::uint64_t>(world.states.size()));
  for (const StateRecord& s : world.states) bin::put_u32(out, static_cast<std::uint32_t>(s.room_id));
  bin::put_matrix_f32(out, world.embeddings);
  if (!out) throw IoError("failed writing world file: " + path);
}

inline World load_world(const std::string& path) {
  auto in = bin::open_in(path);
  bin::check_magic(in, "PAMW", "world");
  bin::check_version(bin::get_u32(in), kWorldFormatVersion, "world");
  World world;
  WorldConfig& c = world.config;
  c.embed_dim = static_cast<int>(bin::get_u32(in));
  c.n_rooms = static_cast<int>(bin::get_u32(in));
  c.room_scale = bin::get_f64(in);
  c.n_objects = static_cast<int>(bin::get_u32(in));
  c.objects_per_room = static_cast<int>(bin::get_u32(in));
  c.n_shared_objects = static_cast<int>(bin::get_u32(in));
  c.object_scale = bin::get_f64(in);
  c.n_trajectories = static_cast<int>(bin::get_u32(in));
  c.trajectory_len = static_cast<int>(bin::get_u32(in));
  c.room_dwell_mean = static_cast<int>(bin::get_u32(in));
  c.state_noise_sigma = bin::get_f64(in);
  c.seed = bin::get_u64(in);

  world.room_centroids = bin::get_matrix_f32(in);
  world.object_features = bin::get_matrix_f32(in);
  const auto n_objects = bin::get_u32(in);
  for (std::uint32_t i = 0; i < n_objects; ++i) {
    const int obj = static_cast<int>(bin::get_u32(in));
    const auto n_rooms = bin::get_u32(in);
    std::set<int> rooms;
    for (std::uint32_t r = 0; r < n_rooms; ++r) rooms.insert(static_cast<int>(bin::get_u32(in)));
    world.object_rooms[obj] = std::move(rooms);
  }

  std::vector<std::vector<int>> room_objects(static_cast<std::size_t>(c.n_rooms));
  for (const auto& [obj, rooms] : world.object_rooms)
    for (int room : rooms) room_objects[static_cast<std::size_t>(room)].push_back(obj);
  for (auto& objs : room_objects) std::sort(objs.begin(), objs.end());

  const auto n_states = bin::get_u64(in);
  world.states.resize(n_states);
  for (std::uint64_t i = 0; i < n_states; ++i) {
    StateRecord& s = world.states[i];
    s.state_id = static_cast<int>(i);
    s.trajectory_id = static_cast<int>(i) / c.trajectory_len;
    s.timestep = static_cast<int>(i) % c.trajectory_len;
    s.room_id = static_cast<int>(bin::get_u32(in));
    s.objects_present = room_objects[static_cast<std::size_t>(s.room_id)];
  }
  world.embeddings = bin::get_matrix_f32(in);
  if (world.embeddings.rows != static_cast<int>(n_states) || world.embeddings.cols != c.embed_dim)
    throw IoError("world file corrupt: embedding table shape mismatch");
  return world;
}

// --------------------------- graph container -------------------------------

inline void save_graph(const AssociationGraph& graph, const std::string& path) {
  auto out = bin::open_out(path);
  bin::put_bytes(out, "PAMG", 4);
  bin::put_u32(out, kGraphFormatVersion);
  bin::put_u32(out, static_cast<std::uint32_t>(graph.tau));
  bin::put_u64(out, static_cast<std::uint64_t>(graph.n_states));
  for (int room : graph.state_room) bin::put_u32(out, static_cast<std::uint32_t>(room));
  for (int traj : graph.state_traj) bin::put_u32(out, static_cast<std::uint32_t>(traj));
  bin::put_u64(out, static_cast<std::uint64_t>(graph.edges.size()));
  for (const Edge& e : graph.edges) {
    bin::put_u32(out, static_cast<std::uint32_t>(e.i));
    bin::put_u32(out, static_cast<std::uint32_t>(e.j));
    const unsigned char cross = e.cross_room ? 1 : 0;
    bin::put_bytes(out, &cross, 1);
  }
  if (!out) throw IoError("failed writing graph file: " + path);
}

inline AssociationGraph load_graph(const std::string& path) {
  auto in = bin::open_in(path);
  bin::check_magic(in, "PAMG", "graph");
  bin::check_version(bin::get_u32(in), kGraphFormatVersion, "graph");
  AssociationGraph graph;
  graph.tau = static_cast<int>(bin::get_u32(in));
  graph.n_states = static_cast<int>(bin::get_u64(in));
  graph.state_room.resize(static_cast<std::size_t>(graph.n_states));
  for (int& room : graph.state_room) room = static_cast<int>(bin::get_u32(in));
  graph.state_traj.resize(static_cast<std::size_t>(graph.n_states));
  for (int& traj : graph.state_traj) traj = static_cast<int>(bin::get_u32(in));
  graph.edges.resize(bin::get_u64(in));
  for (Edge& e : graph.edges) {
    e.i = static_cast<int>(bin::get_u32(in));
    e.j = static_cast<int>(bin::get_u32(in));
    unsigned char cross;
    bin::get_bytes(in, &cross, 1);
    e.cross_room = cross != 0;
  }
  graph_detail::rebuild_adjacency(graph);
  return graph;
}

inline void export_graph_csv(const AssociationGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "i,j,cross_room\n";
  for (const Edge& e : graph.edges) out << e.i << "," << e.j << "," << (e.cross_room ? 1 : 0) << "\n";
  if (!out) throw IoError("failed writing graph csv: " + path);
}

// ------------------------- model checkpoints -------------------------------

// config_echo carries the training configuration as a JSON blob.
inline void save_predictor(const MlpParams& params, const std::string& config_echo, const std::string& path) {
  auto out = bin::open_out(path);
  bin::put_bytes(out, "PAMM", 4);
  bin::put_u32(out, kModelFormatVersion);
  bin::put_u32(out, static_cast<std::uint32_t>(params.in_dim));
  bin::put_u32(out, static_cast<std::uint32_t>(params.hidden_dim));
  bin::put_u32(out, static_cast<std::uint32_t>(params.out_dim));
  bin::put_u32(out, static_cast<std::uint32_t>(params.n_layers));
  for (const Matrix& w : params.weights) bin::put_matrix_f32(out, w);
  for (const auto& b : params.biases) bin::put_f64_vector_f32(out, b);
  bin::put_f64_vector_f32(out, params.ln_gain);
  bin::put_f64_vector_f32(out, params.ln_bias);
  bin::put_string(out, config_echo);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline MlpParams load_predictor(const std::string& path, std::string* config_echo = nullptr) {
  auto in = bin::open_in(path);
  bin::check_magic(in, "PAMM", "predictor checkpoint");
  bin::check_version(bin::get_u32(in), kModelFormatVersion, "predictor checkpoint");
  MlpParams params;
  params.in_dim = static_cast<int>(bin::get_u32(in));
  params.hidden_dim = static_cast<int>(bin::get_u32(in));
  params.out_dim = static_cast<int>(bin::get_u32(in));
  params.n_layers = static_cast<int>(bin::get_u32(in));
  for (int l = 0; l < params.n_layers; ++l) params.weights.push_back(bin::get_matrix_f32(in));
  for (int l = 0; l < params.n_layers; ++l) params.biases.push_back(bin::get_f64_vector_f32(in));
  params.ln_gain = bin::get_f64_vector_f32(in);
  params.ln_bias = bin::get_f64_vector_f32(in);
  const std::string echo = bin::get_string(in);
  if (config_echo) *config_echo = echo;
  return params;
}

inline void save_bilinear(const BilinearParams& params, const std::string& config_echo, const std::string& path) {
  auto out = bin::open_out(path);
  bin::put_bytes(out, "PAMB", 4);
  bin::put_u32(out, kModelFormatVersion);
  bin::put_matrix_f32(out, params.w);
  bin::put_u64(out, params.init_seed);
  bin::put_string(out, config_echo);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline BilinearParams load_bilinear(const std::string& path, std::string* config_echo = nullptr) {
  auto in = bin::open_in(path);
  bin::check_magic(in, "PAMB", "bilinear checkpoint");
  bin::check_version(bin::get_u32(in), kModelFormatVersion, "bilinear checkpoint");
  BilinearParams params;
  params.w = bin::get_matrix_f32(in);
  params.init_seed = bin::get_u64(in);
  const std::string echo = bin::get_string(in);
  if (config_echo) *config_echo = echo;
  return params;
}

}  // namespace pam
