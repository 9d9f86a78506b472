// Copyright 2026 The RIGL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rigl/pipeline.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rigl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json mapping_defaults() {
  return {{"path", ""}, {"delimiter", ","}, {"header", true}, {"time_format", "auto"},
          {"columns", json::object()}};
}

// Objects whose content is user-defined and replaced wholesale on merge.
bool is_leaf_object(const std::string& path) {
  return path.ends_with(".columns") || path == "reward.baselines";
}

void merge_into(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) fail(ErrorKind::kConfig, "config section '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string child = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) fail(ErrorKind::kConfig, "unknown config key '" + child + "'");
    json& slot = base[key];
    if (slot.is_object() && !is_leaf_object(child)) {
      merge_into(slot, value, child);
    } else {
      slot = value;
    }
  }
}

const json& at_path(const json& tree, const std::string& dotted) {
  const json* node = &tree;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      fail(ErrorKind::kConfig, "missing config key '" + dotted + "'");
    }
    node = &(*node)[part];
  }
  return *node;
}

template <typename T>
T get(const RunConfig& cfg, const std::string& dotted) {
  const json& v = at_path(cfg.tree, dotted);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, "config key '" + dotted + "' has the wrong type: " + v.dump());
  }
}

std::size_t get_count(const RunConfig& cfg, const std::string& dotted) {
  const json& v = at_path(cfg.tree, dotted);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    fail(ErrorKind::kConfig, "config key '" + dotted + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read input file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

ColumnMapping mapping_from(const RunConfig& cfg, const std::string& section) {
  ColumnMapping m;
  const auto delim = get<std::string>(cfg, section + ".delimiter");
  if (delim == "\\t" || delim == "tab") {
    m.delimiter = '\t';
  } else if (delim.size() == 1) {
    m.delimiter = delim[0];
  } else {
    fail(ErrorKind::kConfig, section + ".delimiter must be a single character");
  }
  m.header = get<bool>(cfg, section + ".header");
  const auto tf = get<std::string>(cfg, section + ".time_format");
  static const std::map<std::string, TimeFormat> kFormats{{"auto", TimeFormat::kAuto},
                                                          {"epoch", TimeFormat::kEpoch},
                                                          {"iso8601", TimeFormat::kIso8601},
                                                          {"foursquare", TimeFormat::kFoursquare}};
  auto it = kFormats.find(tf);
  if (it == kFormats.end()) fail(ErrorKind::kConfig, "unknown time_format '" + tf + "'");
  m.time_format = it->second;
  for (const auto& [field, ref] : at_path(cfg.tree, section + ".columns").items()) {
    if (ref.is_number_integer() && ref.get<std::int64_t>() >= 0) {
      m.columns[field] = ref.get<std::size_t>();
    } else if (ref.is_string()) {
      m.columns[field] = ref.get<std::string>();
    } else {
      fail(ErrorKind::kConfig, section + ".columns." + field + " must be an index or a name");
    }
  }
  return m;
}

GridSpec grid_from(const RunConfig& cfg) {
  GridSpec g;
  for (const char* k : {"lat_min", "lat_max", "lon_min", "lon_max"}) {
    if (!at_path(cfg.tree, std::string("grid.") + k).is_number()) {
      fail(ErrorKind::kConfig, std::string("grid.") + k + " must be set (no default exists)");
    }
  }
  g.lat_min = get<double>(cfg, "grid.lat_min");
  g.lat_max = get<double>(cfg, "grid.lat_max");
  g.lon_min = get<double>(cfg, "grid.lon_min");
  g.lon_max = get<double>(cfg, "grid.lon_max");
  g.rows = get_count(cfg, "grid.rows");
  g.cols = get_count(cfg, "grid.cols");
  g.validate();
  return g;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp);
    out << text;
    if (!out) fail(ErrorKind::kIo, "short write to " + tmp);
  }
  fs::rename(tmp, path);
}

std::string artifact_header(const char* kind, const std::string& fingerprint,
                            std::uint64_t seed) {
  return std::string("# ") + kind + " fingerprint=" + fingerprint +
         " seed=" + std::to_string(seed) + "\n";
}

json report_json(const CalibrationReport& r) {
  auto comp = [](const RewardComponents& c) { return json{{"d", c.d}, {"c", c.c}, {"p", c.p}}; };
  return {{"baselines", {{"d", r.baselines.d}, {"c", r.baselines.c}, {"p", r.baselines.p}}},
          {"samples", r.samples},
          {"rounds", r.rounds},
          {"min", comp(r.min)},
          {"max", comp(r.max)}};
}

EnvState initial_env_state(const BuildArtifacts& b) {
  return EnvState{b.users.vectors, b.kg_state, 0};
}

CalibrationReport run_calibration(const RunConfig& cfg, const BuildArtifacts& b,
                                  const Streams& streams, const ResolvedOptions& opts) {
  if (streams.train.empty()) fail(ErrorKind::kState, "no training events to calibrate on");
  Environment env(b.kg, initial_env_state(b), initial_gates(cfg, b), opts.strategy);
  const AgentConfig& ac = opts.training.agent;
  const QNetwork q(2 * env.dim(), ac.hidden, b.kg.num_pois(),
                   derive_seed(config_seed(cfg), "agent"));
  std::mt19937_64 rng(derive_seed(config_seed(cfg), "calibration"));
  CalibrationReport rep = calibrate_baselines(env, streams.train, b.category_vectors, q, ac.scaling,
                                              ac.eps_start, opts.calibration_rounds, rng);
  json out = report_json(rep);
  out["fingerprint"] = config_fingerprint(cfg);
  out["seed"] = config_seed(cfg);
  write_text(output_dir(cfg) + "/calibration.json", out.dump(2) + "\n");
  log_info("calibrated", {{"b_d", rep.baselines.d},
                          {"b_c", rep.baselines.c},
                          {"b_p", rep.baselines.p},
                          {"samples", static_cast<std::uint64_t>(rep.samples)}});
  return rep;
}

std::string episode_log_text(const std::string& fp, std::uint64_t seed,
                             const std::vector<EpisodeRecord>& log) {
  std::string s = artifact_header("rigl-episodes", fp, seed);
  s += "episode\tsteps\ttrain_steps\tmean_loss\tmean_reward\taccuracy\tmean_dist_km\tepsilon\n";
  for (const auto& r : log) {
    s += std::to_string(r.episode) + "\t" + std::to_string(r.steps) + "\t" +
         std::to_string(r.train_steps) + "\t" + fmt(r.mean_loss) + "\t" + fmt(r.mean_reward) +
         "\t" + fmt(r.accuracy) + "\t" + fmt(r.mean_dist_km) + "\t" + fmt(r.epsilon) + "\n";
  }
  return s;
}

const char* kMetricNames[] = {"prec_cat", "rec_cat", "avg_sim", "avg_dist_km", "accuracy"};

std::vector<double> metric_values(const EvalReport& r) {
  return {r.prec_cat, r.rec_cat, r.avg_sim, r.avg_dist_km, r.accuracy};
}

}  // namespace

const json& default_config() {
  static const json kDefaults = {
      {"checkins", mapping_defaults()},
      {"taxi", mapping_defaults()},
      {"grid",
       {{"lat_min", nullptr},
        {"lat_max", nullptr},
        {"lon_min", nullptr},
        {"lon_max", nullptr},
        {"rows", 10},
        {"cols", 10}}},
      {"window_len", 3600},
      {"dims", {{"user", 200}, {"kg", 200}}},
      {"word_vectors", ""},
      {"transd", {{"epochs", 100}, {"lr", 0.01}, {"margin", 1.0}, {"neg_per_pos", 1}}},
      {"profile", {{"method", "spectral-lite"}, {"fraction", 0.1}}},
      {"split", {{"train_fraction", 0.9}}},
      {"reward",
       {{"variant", "r2"},
        {"lambda", {{"d", 1.0}, {"c", 1.0}, {"p", 1.0}}},
        {"baselines", "calibrate"},
        {"calibration_rounds", 100}}},
      {"policy", "ddqn"},
      {"update", "up2"},
      {"priority", "td"},
      {"agent",
       {{"gamma", 0.9},
        {"lr", 1e-5},
        {"env_lr", 1e-5},
        {"env_clip", 1.0},
        {"grad_clip", 10.0},
        {"hidden", {256, 128}},
        {"scaling", "block_l2"},
        {"eps_start", 1.0},
        {"eps_end", 0.05},
        {"eps_fraction", 0.5},
        {"target_sync", 100},
        {"train_every", 1},
        {"batch", 32},
        {"capacity", 50000},
        {"episodes", 1}}},
      {"seed", 7},
      {"output_dir", "out"},
      {"cache_dir", ""}};
  return kDefaults;
}

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg{default_config(), base_dir.empty() ? "." : base_dir};
  merge_into(cfg.tree, user, "");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path p = fs::absolute(path);
  return parse_config(ss.str(), p.parent_path().string());
}

void set_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json patch = parsed;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) fail(ErrorKind::kConfig, "empty override key");
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge_into(cfg.tree, patch, "");
}

std::string resolve_path(const RunConfig& cfg, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(cfg.base_dir) / p).lexically_normal().string();
}

std::string output_dir(const RunConfig& cfg) {
  return resolve_path(cfg, get<std::string>(cfg, "output_dir"));
}

std::string cache_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("RIGL_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  const auto configured = get<std::string>(cfg, "cache_dir");
  if (!configured.empty()) return resolve_path(cfg, configured);
  return output_dir(cfg) + "/cache";
}

std::uint64_t config_seed(const RunConfig& cfg) { return get<std::uint64_t>(cfg, "seed"); }

std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose) {
  return fnv1a64(purpose, seed ^ 0xcbf29ce484222325ULL);
}

ResolvedOptions resolve_options(const RunConfig& cfg) {
  ResolvedOptions o;
  AgentConfig& a = o.training.agent;
  const auto policy = get<std::string>(cfg, "policy");
  if (policy == "dqn") {
    a.variant = PolicyVariant::kDqn;
  } else if (policy == "ddqn") {
    a.variant = PolicyVariant::kDdqn;
  } else {
    fail(ErrorKind::kConfig, "policy must be dqn or ddqn, got '" + policy + "'");
  }
  const auto update = get<std::string>(cfg, "update");
  if (update == "up1") {
    o.strategy = UpdateStrategy::kUp1;
  } else if (update == "up2") {
    o.strategy = UpdateStrategy::kUp2;
  } else {
    fail(ErrorKind::kConfig, "update must be up1 or up2, got '" + update + "'");
  }
  const auto priority = get<std::string>(cfg, "priority");
  if (priority == "reward") {
    o.training.priority = PriorityKind::kReward;
  } else if (priority == "td") {
    o.training.priority = PriorityKind::kTd;
  } else {
    fail(ErrorKind::kConfig, "priority must be reward or td, got '" + priority + "'");
  }
  a.gamma = get<double>(cfg, "agent.gamma");
  a.lr = get<double>(cfg, "agent.lr");
  a.env_lr = get<double>(cfg, "agent.env_lr");
  a.env_clip = get<double>(cfg, "agent.env_clip");
  a.grad_clip = get<double>(cfg, "agent.grad_clip");
  a.hidden = get<std::vector<std::size_t>>(cfg, "agent.hidden");
  const auto scaling = get<std::string>(cfg, "agent.scaling");
  if (scaling == "block_l2") {
    a.scaling = StateScaling::kBlockL2;
  } else if (scaling == "none") {
    a.scaling = StateScaling::kNone;
  } else {
    fail(ErrorKind::kConfig, "agent.scaling must be block_l2 or none");
  }
  a.eps_start = get<double>(cfg, "agent.eps_start");
  a.eps_end = get<double>(cfg, "agent.eps_end");
  a.eps_fraction = get<double>(cfg, "agent.eps_fraction");
  a.target_sync = get_count(cfg, "agent.target_sync");
  a.train_every = get_count(cfg, "agent.train_every");
  a.batch = get_count(cfg, "agent.batch");
  a.capacity = get_count(cfg, "agent.capacity");
  a.validate();
  o.training.episodes = get_count(cfg, "agent.episodes");

  RewardSpec& r = o.training.reward;
  const auto variant = get<std::string>(cfg, "reward.variant");
  if (variant == "r1") {
    r.variant = RewardVariant::kR1;
  } else if (variant == "r2") {
    r.variant = RewardVariant::kR2;
  } else {
    fail(ErrorKind::kConfig, "reward.variant must be r1 or r2, got '" + variant + "'");
  }
  r.weights = {get<double>(cfg, "reward.lambda.d"), get<double>(cfg, "reward.lambda.c"),
               get<double>(cfg, "reward.lambda.p")};
  r.weights.validate();
  const json& b = at_path(cfg.tree, "reward.baselines");
  if (b.is_string() && b.get<std::string>() == "calibrate") {
    o.baseline_source = "calibrate";
  } else if (b.is_object()) {
    o.baseline_source = "fixed";
    try {
      r.baselines = {b.at("d").get<double>(), b.at("c").get<double>(), b.at("p").get<double>()};
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, "reward.baselines needs numeric d, c and p");
    }
  } else {
    fail(ErrorKind::kConfig, "reward.baselines must be \"calibrate\" or {\"d\",\"c\",\"p\"}");
  }
  o.calibration_rounds = get_count(cfg, "reward.calibration_rounds");
  if (r.variant == RewardVariant::kR2 && o.baseline_source == "calibrate" &&
      o.calibration_rounds < 4) {
    fail(ErrorKind::kConfig, "reward.calibration_rounds must be >= 4");
  }
  o.train_fraction = get<double>(cfg, "split.train_fraction");
  if (!(o.train_fraction > 0.0 && o.train_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "split.train_fraction must lie in (0, 1]");
  }
  return o;
}

void validate_config(const RunConfig& cfg) {
  mapping_from(cfg, "checkins");
  mapping_from(cfg, "taxi");
  grid_from(cfg);
  resolve_options(cfg);
  const auto checkins = get<std::string>(cfg, "checkins.path");
  if (checkins.empty()) fail(ErrorKind::kConfig, "checkins.path must be set");
  for (const char* key : {"checkins.path", "taxi.path", "word_vectors"}) {
    const auto p = resolve_path(cfg, get<std::string>(cfg, key));
    if (!p.empty() && !fs::is_regular_file(p)) {
      fail(ErrorKind::kIo, std::string("input file for ") + key + " does not exist: " + p);
    }
  }
  if (get<std::int64_t>(cfg, "window_len") <= 0) {
    fail(ErrorKind::kConfig, "window_len must be positive");
  }
  if (get_count(cfg, "dims.user") != get_count(cfg, "dims.kg")) {
    fail(ErrorKind::kConfig,
         "dims.user and dims.kg must be equal: the state updates mix user and POI vectors "
         "elementwise");
  }
  if (get_count(cfg, "dims.user") < 2) fail(ErrorKind::kConfig, "dims must be >= 2");
  const double frac = get<double>(cfg, "profile.fraction");
  if (!(frac > 0.0 && frac <= 1.0)) fail(ErrorKind::kConfig, "profile.fraction must lie in (0, 1]");
  const auto method = get<std::string>(cfg, "profile.method");
  const auto names = user_initializer_names();
  if (std::find(names.begin(), names.end(), method) == names.end()) {
    fail(ErrorKind::kConfig, "unknown profile.method '" + method + "'");
  }
}

std::string config_fingerprint(const RunConfig& cfg) {
  json t = cfg.tree;
  t.erase("output_dir");
  t.erase("cache_dir");
  return hex64(fnv1a64(t.dump()));
}

std::string build_fingerprint(const RunConfig& cfg) {
  json t;
  for (const char* k : {"checkins", "taxi", "grid", "window_len", "dims", "word_vectors", "transd",
                        "profile", "seed"}) {
    t[k] = cfg.tree.at(k);
  }
  for (const char* key : {"checkins.path", "taxi.path", "word_vectors"}) {
    const auto p = resolve_path(cfg, get<std::string>(cfg, key));
    if (!p.empty()) t["digest"][key] = file_digest(p);
  }
  t["format"] = kFormatVersion;
  return hex64(fnv1a64(t.dump()));
}

GateParams initial_gates(const RunConfig& cfg, const BuildArtifacts& b) {
  return GateParams::random(b.kg_state.dim(), b.grid.cells(),
                            derive_seed(config_seed(cfg), "gates"));
}

BuildResult cmd_build(const RunConfig& cfg) {
  validate_config(cfg);
  const std::string fp = build_fingerprint(cfg);
  BuildResult res;
  res.path = cache_dir(cfg) + "/build-" + fp + ".bin";
  if (fs::is_regular_file(res.path)) {
    auto loaded = std::make_shared<BuildArtifacts>(load_build(res.path));
    if (loaded->fingerprint == fp) {
      res.cache_hit = true;
      res.artifacts = std::move(loaded);
      log_info("build_cache_hit", {{"path", res.path}});
      return res;
    }
    log_warn("build_cache_stale", {{"path", res.path}});
  }

  auto b = std::make_shared<BuildArtifacts>();
  b->fingerprint = fp;
  b->seed = config_seed(cfg);
  b->grid = grid_from(cfg);
  b->window_len = get<std::int64_t>(cfg, "window_len");

  auto checkins = parse_checkins(resolve_path(cfg, get<std::string>(cfg, "checkins.path")),
                                 mapping_from(cfg, "checkins"));
  log_parse_report(checkins.report);
  b->checkins = std::move(checkins.records);
  b->checkin_report = std::move(checkins.report);

  const auto taxi_path = resolve_path(cfg, get<std::string>(cfg, "taxi.path"));
  if (!taxi_path.empty()) {
    auto taxi = parse_taxi(taxi_path, mapping_from(cfg, "taxi"));
    log_parse_report(taxi.report);
    b->contexts = compute_temporal_contexts(taxi.records, b->grid, b->window_len);
    b->taxi_report = std::move(taxi.report);
  } else {
    log_warn("no_taxi_data", {{"effect", "every temporal context is zero"}});
  }

  b->kg = build_spatial_kg(b->checkins, b->grid);
  TransdConfig tc;
  tc.dim = get_count(cfg, "dims.kg");
  tc.epochs = get_count(cfg, "transd.epochs");
  tc.lr = get<double>(cfg, "transd.lr");
  tc.margin = get<double>(cfg, "transd.margin");
  tc.neg_per_pos = get_count(cfg, "transd.neg_per_pos");
  tc.seed = derive_seed(b->seed, "transd");
  b->embeddings = train_transd(b->kg, tc, &b->transd_loss);
  b->kg_state = export_initial_state(b->embeddings, b->kg);

  std::map<std::string, std::vector<std::size_t>> sequences;
  for (const auto& e : b->checkins) {
    sequences[e.user_id].push_back(b->kg.poi_category[b->kg.poi_index(e.poi_id)]);
  }
  std::vector<std::string> ids;
  std::vector<MobilityGraph> graphs;
  const double frac = get<double>(cfg, "profile.fraction");
  for (const auto& [user, cats] : sequences) {
    ids.push_back(user);
    graphs.push_back(build_mobility_graph(cats, frac));
  }
  b->users = init_user_states(ids, graphs, get_count(cfg, "dims.user"),
                              b->kg.num_categories(), get<std::string>(cfg, "profile.method"),
                              derive_seed(b->seed, "users"));

  const auto wv = resolve_path(cfg, get<std::string>(cfg, "word_vectors"));
  b->category_vectors = wv.empty()
                            ? CategoryVectors::one_hot(b->kg.num_categories())
                            : CategoryVectors::from_word_file(wv, b->kg.category_names);

  save_build(res.path, *b);
  log_info("built", {{"path", res.path},
                     {"events", static_cast<std::uint64_t>(b->checkins.size())},
                     {"users", static_cast<std::uint64_t>(b->users.size())},
                     {"pois", static_cast<std::uint64_t>(b->kg.num_pois())},
                     {"categories", static_cast<std::uint64_t>(b->kg.num_categories())},
                     {"zones", static_cast<std::uint64_t>(b->kg.num_zones())},
                     {"windows", static_cast<std::uint64_t>(b->contexts.size())}});
  res.artifacts = std::move(b);
  return res;
}

Streams make_streams(const BuildArtifacts& b, double train_fraction) {
  Streams s;
  std::map<std::string, std::size_t> user_index;
  for (std::size_t i = 0; i < b.users.user_ids.size(); ++i) user_index[b.users.user_ids[i]] = i;
  for (const auto& c : b.contexts) s.all.traffic.push_back(c.traffic);
  s.all.zero_traffic = Mat::Zero(static_cast<Eigen::Index>(b.grid.cells()), 3);
  std::size_t dropped = 0;
  for (const auto& e : b.checkins) {
    auto u = user_index.find(e.user_id);
    auto p = b.kg.poi_lookup.find(e.poi_id);
    if (u == user_index.end() || p == b.kg.poi_lookup.end()) {
      ++dropped;
      continue;
    }
    s.all.events.push_back({u->second, p->second, context_index(e.timestamp, b.contexts),
                            e.timestamp});
  }
  if (dropped > 0) log_warn("events_dropped", {{"count", static_cast<std::uint64_t>(dropped)}});
  auto [train, test] = split_chronological(s.all, train_fraction);
  s.train = std::move(train);
  s.test = std::move(test);
  s.trained_users.assign(b.users.size(), false);
  for (const auto& e : s.train.events) s.trained_users[e.user] = true;
  return s;
}

CalibrationReport cmd_calibrate(const RunConfig& cfg) {
  const BuildResult built = cmd_build(cfg);
  const ResolvedOptions opts = resolve_options(cfg);
  const Streams streams = make_streams(*built.artifacts, opts.train_fraction);
  return run_calibration(cfg, *built.artifacts, streams, opts);
}

TrainOutcome cmd_train(const RunConfig& cfg, const TrainRequest& request) {
  const BuildResult built = cmd_build(cfg);
  const BuildArtifacts& b = *built.artifacts;
  ResolvedOptions opts = resolve_options(cfg);
  const Streams streams = make_streams(b, opts.train_fraction);
  const std::string fp = config_fingerprint(cfg);
  const std::uint64_t seed = config_seed(cfg);

  TrainingCheckpoint ckpt;
  ckpt.fingerprint = fp;
  ckpt.seed = seed;
  ckpt.episodes_total = opts.training.episodes;
  if (!request.resume_path.empty()) {
    ckpt = load_checkpoint(request.resume_path);
    if (ckpt.fingerprint != fp) {
      fail(ErrorKind::kState, "checkpoint " + request.resume_path +
                                  " was produced by a different config (fingerprint " +
                                  ckpt.fingerprint + ", expected " + fp + ")");
    }
    opts.training.reward.baselines = ckpt.baselines;
  } else {
    if (opts.training.reward.variant == RewardVariant::kR2) {
      if (opts.baseline_source == "calibrate" && !streams.train.empty()) {
        opts.training.reward.baselines = run_calibration(cfg, b, streams, opts).baselines;
      }
    } else {
      opts.training.reward.baselines = {};
    }
    ckpt.baselines = opts.training.reward.baselines;
    ckpt.state = Trainer::initial_state(2 * b.kg_state.dim(), b.kg.num_pois(),
                                        opts.training.agent, initial_gates(cfg, b),
                                        derive_seed(seed, "agent"));
  }

  Trainer trainer(b.kg, initial_env_state(b), opts.strategy, streams.train, b.category_vectors,
                  opts.training, std::move(ckpt.state));
  trainer.run(request.stop_after.value_or(static_cast<std::size_t>(-1)));

  ckpt.state = trainer.state();
  TrainOutcome out;
  out.checkpoint_path = output_dir(cfg) + "/checkpoint.bin";
  out.log_path = output_dir(cfg) + "/episodes.tsv";
  out.episodes_done = ckpt.state.episodes_done;
  out.episodes_total = opts.training.episodes;
  out.finished = trainer.finished();
  save_checkpoint(out.checkpoint_path, ckpt);
  write_text(out.log_path, episode_log_text(fp, seed, ckpt.state.log));
  log_info("trained", {{"checkpoint", out.checkpoint_path},
                       {"episodes", static_cast<std::uint64_t>(out.episodes_done)},
                       {"finished", out.finished ? "true" : "false"}});
  return out;
}

EvalReport cmd_eval(const RunConfig& cfg, const EvalRequest& request) {
  const BuildResult built = cmd_build(cfg);
  const BuildArtifacts& b = *built.artifacts;
  const ResolvedOptions opts = resolve_options(cfg);
  const Streams streams = make_streams(b, opts.train_fraction);
  if (streams.test.empty()) fail(ErrorKind::kState, "the test shard is empty");
  const std::string fp = config_fingerprint(cfg);

  const std::string ckpt_path =
      request.checkpoint_path.empty() ? output_dir(cfg) + "/checkpoint.bin" : request.checkpoint_path;
  std::optional<TrainingCheckpoint> ckpt;
  if (!request.oracle || fs::is_regular_file(ckpt_path)) {
    if (!fs::is_regular_file(ckpt_path)) fail(ErrorKind::kIo, "missing checkpoint: " + ckpt_path);
    ckpt = load_checkpoint(ckpt_path);
    if (ckpt->fingerprint != fp) {
      fail(ErrorKind::kState, "checkpoint " + ckpt_path + " was produced by a different config");
    }
  }
  Environment env(b.kg, initial_env_state(b), ckpt ? ckpt->state.gates : initial_gates(cfg, b),
                  opts.strategy);
  replay_events(env, streams.train);

  std::vector<PredictionPair> pairs;
  const Policy policy = request.oracle ? oracle_policy()
                                       : greedy_policy(ckpt->state.q_e, opts.training.agent.scaling);
  EvalReport rep =
      evaluate(policy, env, streams.test, b.category_vectors, streams.trained_users, &pairs);
  rep.fingerprint = fp;

  const std::string dir = output_dir(cfg) + (request.oracle ? "/eval_oracle" : "/eval");
  const std::uint64_t seed = config_seed(cfg);
  std::string tsv = artifact_header("rigl-eval", fp, seed);
  tsv += "prec_cat\trec_cat\tavg_sim\tavg_dist_km\taccuracy\tpredictions\tskipped_users\n";
  tsv += fmt(rep.prec_cat) + "\t" + fmt(rep.rec_cat) + "\t" + fmt(rep.avg_sim) + "\t" +
         fmt(rep.avg_dist_km) + "\t" + fmt(rep.accuracy) + "\t" + std::to_string(rep.predictions) +
         "\t" + std::to_string(rep.skipped_users) + "\n";
  write_text(dir + "/report.tsv", tsv);

  json full = {{"fingerprint", fp},
               {"seed", seed},
               {"policy", request.oracle ? "oracle" : "greedy"},
               {"prec_cat", rep.prec_cat},
               {"rec_cat", rep.rec_cat},
               {"avg_sim", rep.avg_sim},
               {"avg_dist_km", rep.avg_dist_km},
               {"accuracy", rep.accuracy},
               {"predictions", rep.predictions},
               {"skipped_users", rep.skipped_users},
               {"skipped_events", rep.skipped_events},
               {"per_user", json::array()}};
  for (const auto& u : rep.per_user) {
    full["per_user"].push_back({{"user", b.users.user_ids[u.user]},
                                {"predictions", u.predictions},
                                {"accuracy", u.accuracy},
                                {"prec_cat", u.prec_cat},
                                {"rec_cat", u.rec_cat},
                                {"avg_sim", u.avg_sim},
                                {"avg_dist_km", u.avg_dist_km}});
  }
  write_text(dir + "/report.json", full.dump(2) + "\n");

  if (request.write_pairs) {
    std::string p = artifact_header("rigl-pairs", fp, seed);
    p += "user\ttime\treal_poi\tpred_poi\treal_category\tpred_category\tsim\tdist_km\n";
    for (const auto& x : pairs) {
      p += b.users.user_ids[x.user] + "\t" + std::to_string(x.time) + "\t" +
           b.kg.poi_ids[x.real_poi] + "\t" + b.kg.poi_ids[x.pred_poi] + "\t" +
           b.kg.category_ids[x.real_category] + "\t" + b.kg.category_ids[x.pred_category] + "\t" +
           fmt(x.sim) + "\t" + fmt(x.dist_km) + "\n";
    }
    write_text(dir + "/pairs.tsv", p);
  }
  log_info("evaluated", {{"prec_cat", rep.prec_cat},
                         {"rec_cat", rep.rec_cat},
                         {"avg_sim", rep.avg_sim},
                         {"avg_dist_km", rep.avg_dist_km},
                         {"predictions", static_cast<std::uint64_t>(rep.predictions)}});
  return rep;
}

SweepAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
    fail(ErrorKind::kConfig, "sweep axis must look like key=v1,v2: '" + spec + "'");
  }
  SweepAxis axis;
  axis.key = spec.substr(0, eq);
  const std::string rest = spec.substr(eq + 1);
  json arr;
  bool is_array = false;
  try {
    arr = json::parse(rest);
    is_array = arr.is_array();
  } catch (const json::parse_error&) {
  }
  if (is_array) {
    for (const auto& v : arr) axis.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  } else {
    std::stringstream ss(rest);
    std::string v;
    while (std::getline(ss, v, ',')) {
      if (!v.empty()) axis.values.push_back(v);
    }
  }
  if (axis.values.empty()) fail(ErrorKind::kConfig, "sweep axis '" + axis.key + "' has no values");
  return axis;
}

SweepOutcome cmd_sweep(const RunConfig& cfg, const std::vector<SweepAxis>& axes) {
  if (axes.empty()) fail(ErrorKind::kConfig, "sweep needs at least one axis");
  std::set<std::string> keys;
  for (const auto& a : axes) {
    if (a.values.empty()) fail(ErrorKind::kConfig, "sweep axis '" + a.key + "' has no values");
    if (a.key == "output_dir" || a.key == "cache_dir") {
      fail(ErrorKind::kConfig, "cannot sweep over " + a.key);
    }
    if (!keys.insert(a.key).second) fail(ErrorKind::kConfig, "duplicate sweep axis " + a.key);
    RunConfig probe = cfg;
    set_override(probe, a.key, a.values.front());
  }
  const std::string root = output_dir(cfg) + "/sweep";
  const std::string shared_cache = cache_dir(cfg);
  std::size_t points = 1;
  for (const auto& a : axes) points *= a.values.size();

  std::string table = artifact_header("rigl-sweep", config_fingerprint(cfg), config_seed(cfg));
  table += "point";
  for (const auto& a : axes) table += "\t" + a.key;
  table += "\tfingerprint\tmetric\tvalue\n";
  SweepOutcome out;
  out.points = points;
  for (std::size_t k = 0; k < points; ++k) {
    RunConfig point = cfg;
    std::vector<std::string> chosen;
    std::size_t rem = k;
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t i = axes.size(); i-- > 0;) {
      idx[i] = rem % axes[i].values.size();
      rem /= axes[i].values.size();
    }
    for (std::size_t i = 0; i < axes.size(); ++i) {
      set_override(point, axes[i].key, axes[i].values[idx[i]]);
      chosen.push_back(axes[i].values[idx[i]]);
    }
    point.tree["output_dir"] = root + "/point_" + std::to_string(k);
    point.tree["cache_dir"] = shared_cache;
    log_info("sweep_point", {{"point", static_cast<std::uint64_t>(k)},
                             {"of", static_cast<std::uint64_t>(points)}});
    cmd_train(point);
    const EvalReport rep = cmd_eval(point);
    const std::vector<double> values = metric_values(rep);
    for (std::size_t m = 0; m < values.size(); ++m) {
      table += std::to_string(k);
      for (const auto& v : chosen) table += "\t" + v;
      table += "\t" + rep.fingerprint + "\t" + kMetricNames[m] + "\t" + fmt(values[m]) + "\n";
      ++out.rows;
    }
  }
  out.table_path = root + "/results.tsv";
  write_text(out.table_path, table);
  return out;
}

}  // namespace rigl
