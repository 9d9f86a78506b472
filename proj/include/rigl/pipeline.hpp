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

// Declarative run configuration and the build / calibrate / train / eval /
// sweep commands built on it.

#ifndef RIGL_PIPELINE_HPP_
#define RIGL_PIPELINE_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rigl/checkpoint.hpp"
#include "rigl/evaluation.hpp"
#include "rigl/training.hpp"

namespace rigl {

// A JSON tree with every default filled in, plus the directory that relative
// paths are resolved against.
struct RunConfig {
  nlohmann::json tree;
  std::string base_dir;
};

// The defaults of every field.
const nlohmann::json& default_config();

RunConfig parse_config(const std::string& json_text, const std::string& base_dir);
RunConfig load_config(const std::string& path);

// Sets a dotted key ("agent.lr"). The value is parsed as JSON when possible
// and taken as a string otherwise. Unknown keys are rejected.
void set_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Checks enums, ranges and that referenced input files exist.
void validate_config(const RunConfig& cfg);

// Hash of the canonical JSON without output_dir.
std::string config_fingerprint(const RunConfig& cfg);
// Hash of the fields and input-file contents the build depends on.
std::string build_fingerprint(const RunConfig& cfg);

std::string resolve_path(const RunConfig& cfg, const std::string& path);
std::string output_dir(const RunConfig& cfg);
// RIGL_CACHE_DIR when set, else <output_dir>/cache.
std::string cache_dir(const RunConfig& cfg);

std::uint64_t config_seed(const RunConfig& cfg);
// Independent seed for one named consumer of randomness.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose);

struct BuildResult {
  bool cache_hit = false;
  std::string path;
  std::shared_ptr<const BuildArtifacts> artifacts;
};

BuildResult cmd_build(const RunConfig& cfg);

// Event stream over the built check-ins, split per user.
struct Streams {
  EventStream all;
  EventStream train;
  EventStream test;
  std::vector<bool> trained_users;
};
Streams make_streams(const BuildArtifacts& b, double train_fraction);

struct ResolvedOptions {
  TrainingOptions training;
  UpdateStrategy strategy = UpdateStrategy::kUp2;
  std::string baseline_source;  // "calibrate" or "fixed"
  std::size_t calibration_rounds = 100;
  double train_fraction = 0.9;
};
ResolvedOptions resolve_options(const RunConfig& cfg);

GateParams initial_gates(const RunConfig& cfg, const BuildArtifacts& b);

CalibrationReport cmd_calibrate(const RunConfig& cfg);

struct TrainRequest {
  std::string resume_path;                // empty: start fresh
  std::optional<std::size_t> stop_after;  // episodes to run in this call
};

struct TrainOutcome {
  std::string checkpoint_path;
  std::string log_path;
  std::size_t episodes_done = 0;
  std::size_t episodes_total = 0;
  bool finished = false;
};

TrainOutcome cmd_train(const RunConfig& cfg, const TrainRequest& request = {});

struct EvalRequest {
  std::string checkpoint_path;  // empty: <output_dir>/checkpoint.bin
  bool oracle = false;
  bool write_pairs = true;
};

EvalReport cmd_eval(const RunConfig& cfg, const EvalRequest& request = {});

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

// "key=v1,v2,..." (values containing commas may be given as a JSON array).
SweepAxis parse_axis(const std::string& spec);

struct SweepOutcome {
  std::string table_path;
  std::size_t points = 0;
  std::size_t rows = 0;
};

// Cartesian product of the axes; each point trains and evaluates in
// <output_dir>/sweep/point_<k>. One long-form row per (point, metric).
SweepOutcome cmd_sweep(const RunConfig& cfg, const std::vector<SweepAxis>& axes);

}  // namespace rigl

#endif  // RIGL_PIPELINE_HPP_
