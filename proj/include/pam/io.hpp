#pragma once

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pam/eval_metrics.hpp"
#include "pam/serialize.hpp"

namespace pam {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Flat key = value config files (# comments, optional quotes). Human-editable
// mirrors of the config structs; errors name the offending field.
// ---------------------------------------------------------------------------

class KeyValueFile {
public:
  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
  }

  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>") {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      if (key.empty())
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing required field '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long long get_int(const std::string& key) const { return to_int(key, get_string(key)); }
  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? to_int(key, get_string(key)) : fallback;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string raw = get_string(key);
    try {
      return std::stoull(raw);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": field '" + key + "' is not an unsigned integer: " + raw);
    }
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? to_double(key, get_string(key)) : fallback;
  }

  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ','))
      out.push_back(static_cast<int>(to_int(key, trim(item))));
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  long long to_int(const std::string& key, const std::string& raw) const {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": field '" + key + "' is not an integer: " + raw);
    }
  }

  double to_double(const std::string& key, const std::string& raw) const {
    try {
      return std::stod(raw);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": field '" + key + "' is not a number: " + raw);
    }
  }

  std::map<std::string, std::string> values_;
  std::string origin_;
};

// --------------------------- world config ----------------------------------

inline WorldConfig world_config_from_kv(const KeyValueFile& kv) {
  WorldConfig c;
  c.embed_dim = static_cast<int>(kv.get_int("embed_dim"));
  c.n_rooms = static_cast<int>(kv.get_int("n_rooms"));
  c.room_scale = kv.get_double("room_scale");
  c.n_objects = static_cast<int>(kv.get_int("n_objects"));
  c.objects_per_room = static_cast<int>(kv.get_int("objects_per_room"));
  c.n_shared_objects = static_cast<int>(kv.get_int("n_shared_objects"));
  c.object_scale = kv.get_double("object_scale");
  c.n_trajectories = static_cast<int>(kv.get_int("n_trajectories"));
  c.trajectory_len = static_cast<int>(kv.get_int("trajectory_len"));
  c.room_dwell_mean = static_cast<int>(kv.get_int("room_dwell_mean"));
  c.state_noise_sigma = kv.get_double("state_noise_sigma");
  c.seed = kv.get_u64("seed");
  c.validate();
  return c;
}

inline WorldConfig load_world_config(const std::string& path) {
  return world_config_from_kv(KeyValueFile::parse_file(path));
}

// --------------------------- train config ----------------------------------

struct TrainFileConfig {
  TrainConfig train;
  int tau = 5;
  std::string model = "predictor";  // or "bilinear"
  double holdout_fraction = 0.0;    // 0 disables the anchor holdout
  std::uint64_t holdout_seed = 7;
  double split_fraction = 0.0;  // 0 disables the edge split; train side is used
  std::uint64_t split_seed = 9;
};

inline TrainFileConfig train_config_from_kv(const KeyValueFile& kv) {
  TrainFileConfig f;
  f.tau = static_cast<int>(kv.get_int("tau"));
  f.model = kv.get_string("model", "predictor");
  if (f.model != "predictor" && f.model != "bilinear")
    throw ConfigError("train config: field 'model' must be predictor or bilinear");
  TrainConfig& t = f.train;
  t.epochs = static_cast<int>(kv.get_int("epochs"));
  t.batch_size = static_cast<int>(kv.get_int("batch_size"));
  t.n_pairs = kv.get_int("n_pairs");
  const std::string sampling = kv.get_string("sampling", "fixed");
  if (sampling == "fixed")
    t.sampling = SamplingMode::kFixed;
  else if (sampling == "online")
    t.sampling = SamplingMode::kOnline;
  else
    throw ConfigError("train config: field 'sampling' must be fixed or online");
  t.hidden_dim = static_cast<int>(kv.get_int("hidden_dim"));
  t.n_layers = static_cast<int>(kv.get_int("n_layers", 4));
  t.schedule.lr_start = kv.get_double("lr_start", 5e-4);
  t.schedule.lr_end = kv.get_double("lr_end", 1e-5);
  t.schedule.temp_start = kv.get_double("temp_start", 0.15);
  t.schedule.temp_end = kv.get_double("temp_end", 0.05);
  t.schedule.total_epochs = static_cast<int>(kv.get_int("schedule_epochs", t.epochs));
  t.init_seed = kv.get_u64("init_seed", 42);
  t.pair_seed = kv.get_u64("pair_seed", t.init_seed);
  f.holdout_fraction = kv.get_double("holdout_fraction", 0.0);
  f.holdout_seed = kv.get_u64("holdout_seed", 7);
  f.split_fraction = kv.get_double("split_fraction", 0.0);
  f.split_seed = kv.get_u64("split_seed", 9);
  t.validate();
  return f;
}

inline TrainFileConfig load_train_config(const std::string& path) {
  return train_config_from_kv(KeyValueFile::parse_file(path));
}

// --------------------------- eval config ------------------------------------

struct EvalFileConfig {
  EvalConfig eval;
  int tau = 5;
};

inline EvalFileConfig eval_config_from_kv(const KeyValueFile& kv) {
  EvalFileConfig f;
  f.tau = static_cast<int>(kv.get_int("tau"));
  EvalConfig& e = f.eval;
  e.k_values = kv.get_int_list("k_values", {1, 5, 20});
  e.n_queries_precision = static_cast<int>(kv.get_int("n_queries_precision", 500));
  e.n_queries_cbr = static_cast<int>(kv.get_int("n_queries_cbr", 500));
  e.n_queries_auc = static_cast<int>(kv.get_int("n_queries_auc", 300));
  e.auc_negative_cap = static_cast<int>(kv.get_int("auc_negative_cap", 2000));
  e.n_queries_spec = static_cast<int>(kv.get_int("n_queries_spec", 300));
  e.query_seed = kv.get_u64("query_seed", 42);
  e.hop_depths = kv.get_int_list("hop_depths", {1, 2, 3});
  e.hop_beam = static_cast<int>(kv.get_int("hop_beam", 5));
  e.hop_k = static_cast<int>(kv.get_int("hop_k", 20));
  e.recency_lambda = kv.get_double("recency_lambda", 1.0);
  e.recency_k = static_cast<int>(kv.get_int("recency_k", 20));
  e.validate();
  return f;
}

inline EvalFileConfig load_eval_config(const std::string& path) {
  return eval_config_from_kv(KeyValueFile::parse_file(path));
}

// ---------------------------------------------------------------------------
// JSON conversions. nlohmann objects iterate in sorted key order, so dumps
// are canonical and reruns are byte-comparable.
// ---------------------------------------------------------------------------

inline Json to_json(const WorldConfig& c) {
  return Json{{"embed_dim", c.embed_dim},
              {"n_rooms", c.n_rooms},
              {"room_scale", c.room_scale},
              {"n_objects", c.n_objects},
              {"objects_per_room", c.objects_per_room},
              {"n_shared_objects", c.n_shared_objects},
              {"object_scale", c.object_scale},
              {"n_trajectories", c.n_trajectories},
              {"trajectory_len", c.trajectory_len},
              {"room_dwell_mean", c.room_dwell_mean},
              {"state_noise_sigma", c.state_noise_sigma},
              {"seed", c.seed}};
}

inline Json to_json(const TrainConfig& t) {
  Json j{{"epochs", t.epochs},
         {"batch_size", t.batch_size},
         {"n_pairs", t.n_pairs},
         {"sampling", sampling_mode_name(t.sampling)},
         {"hidden_dim", t.hidden_dim},
         {"n_layers", t.n_layers},
         {"lr_start", t.schedule.lr_start},
         {"lr_end", t.schedule.lr_end},
         {"temp_start", t.schedule.temp_start},
         {"temp_end", t.schedule.temp_end},
         {"schedule_epochs", t.schedule.total_epochs},
         {"init_seed", t.init_seed},
         {"pair_seed", t.pair_seed}};
  if (t.anchor_holdout)
    j["anchor_holdout"] = {{"fraction", t.anchor_holdout->fraction},
                           {"seed", t.anchor_holdout->seed},
                           {"held_count", t.anchor_holdout->held_states.size()}};
  if (t.edge_split)
    j["edge_split"] = {{"fraction", t.edge_split->fraction},
                       {"seed", t.edge_split->seed},
                       {"train_count", t.edge_split->train_count}};
  return j;
}

inline Json to_json(const EvalConfig& e) {
  return Json{{"k_values", e.k_values},
              {"n_queries_precision", e.n_queries_precision},
              {"n_queries_cbr", e.n_queries_cbr},
              {"n_queries_auc", e.n_queries_auc},
              {"auc_negative_cap", e.auc_negative_cap},
              {"n_queries_spec", e.n_queries_spec},
              {"query_seed", e.query_seed},
              {"hop_depths", e.hop_depths},
              {"hop_beam", e.hop_beam},
              {"hop_k", e.hop_k},
              {"recency_lambda", e.recency_lambda},
              {"recency_grid", e.recency_grid},
              {"recency_k", e.recency_k}};
}

inline Json to_json(const TrainReport& r) {
  return Json{{"epoch_loss", r.epoch_loss},
              {"final_loss", r.final_loss},
              {"wall_seconds", r.wall_seconds},
              {"pairs_per_epoch", r.pairs_per_epoch},
              {"model", r.model},
              {"sampling", r.sampling}};
}

inline Json to_json(const MethodMetrics& m) {
  Json ap, cbr, spec, hops;
  for (const auto& [k, v] : m.ap) ap[std::to_string(k)] = v;
  for (const auto& [k, v] : m.cbr) cbr[std::to_string(k)] = v;
  for (const auto& [k, v] : m.spec) spec[std::to_string(k)] = v;
  for (const auto& [d, v] : m.hop_recall) hops[std::to_string(d)] = v;
  Json grid;
  for (const auto& [lam, wu] : m.recency.grid) {
    std::ostringstream key;
    key << lam;
    grid[key.str()] = {{"weighted", wu.first}, {"uniform", wu.second}};
  }
  return Json{{"ap_at_k", ap},
              {"cbr_at_k", cbr},
              {"spec_at_k", spec},
              {"auc_overall", m.auc_overall},
              {"auc_cross_room", {{"value", m.auc_cross_room}, {"n_queries", m.n_auc_cross_queries}}},
              {"multi_hop_cross_r20", hops},
              {"recency",
               {{"best_lambda", m.recency.best_lambda},
                {"weighted", m.recency.weighted},
                {"uniform", m.recency.uniform},
                {"grid", grid}}},
              {"trained", m.trained}};
}

inline Json to_json(const MetricsReport& r) {
  Json methods;
  for (const auto& [name, metrics] : r.methods) methods[name] = to_json(metrics);
  Json sets;
  for (const auto& [name, info] : r.query_sets)
    sets[name] = {{"requested", info.requested}, {"qualifying", info.qualifying}, {"used", info.used}};
  return Json{{"schema_version", 1}, {"methods", methods}, {"query_seed", r.query_seed}, {"query_sets", sets}};
}

// Table-shaped CSV: one metric per row, one column per method.
inline std::string metrics_report_csv(const MetricsReport& report) {
  std::vector<std::string> method_order;
  for (const std::string& preferred : {"predictor", "cosine", "bilinear"})
    if (report.methods.count(preferred)) method_order.push_back(preferred);
  for (const auto& [name, _] : report.methods)
    if (std::find(method_order.begin(), method_order.end(), name) == method_order.end())
      method_order.push_back(name);

  std::vector<std::string> metric_order;
  std::map<std::string, std::map<std::string, double>> flat;
  for (const std::string& name : method_order) {
    flat[name] = report.methods.at(name).flatten();
    for (const auto& [metric, _] : flat[name])
      if (std::find(metric_order.begin(), metric_order.end(), metric) == metric_order.end())
        metric_order.push_back(metric);
  }
  std::sort(metric_order.begin(), metric_order.end());

  std::ostringstream out;
  out << "metric";
  for (const auto& name : method_order) out << "," << name;
  out << "\n";
  out.setf(std::ios::fmtflags(0), std::ios::floatfield);
  out.precision(10);
  for (const auto& metric : metric_order) {
    out << metric;
    for (const auto& name : method_order) {
      out << ",";
      const auto it = flat[name].find(metric);
      if (it != flat[name].end()) out << it->second;
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Files and run manifests.
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("failed writing: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void require_writable(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw ConfigError("refusing to overwrite existing path '" + path + "' (pass --force to allow)");
}

struct RunManifest {
  std::string tool_version = kVersion;
  std::string created_utc;
  std::map<std::string, std::string> config_hashes;  // name -> fnv1a64 hex of canonical JSON
  std::map<std::string, std::string> output_files;   // relative path -> content hash
  std::map<std::string, std::uint64_t> seeds;

  void record_config(const std::string& name, const Json& config) {
    const std::string dump = config.dump();
    config_hashes[name] = hex64(fnv1a64(dump.data(), dump.size()));
  }

  void record_file(const std::filesystem::path& dir, const std::string& relative) {
    output_files[relative] = hex64(fnv1a64_file((dir / relative).string()));
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline void write_manifest(const std::filesystem::path& dir, RunManifest manifest) {
  manifest.created_utc = utc_timestamp();
  Json j{{"tool_version", manifest.tool_version},
         {"created_utc", manifest.created_utc},
         {"config_hashes", manifest.config_hashes},
         {"output_files", manifest.output_files},
         {"seeds", manifest.seeds}};
  write_text_file((dir / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace pam
