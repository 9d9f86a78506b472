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

// Versioned binary files for build artifacts and training checkpoints. Each
// file starts with a magic tag, a format version, the config fingerprint and
// the run seed.

#ifndef RIGL_CHECKPOINT_HPP_
#define RIGL_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "rigl/ingest.hpp"
#include "rigl/profile_init.hpp"
#include "rigl/reward.hpp"
#include "rigl/spatial_kg.hpp"
#include "rigl/training.hpp"

namespace rigl {

inline constexpr std::uint32_t kFormatVersion = 1;

struct BuildArtifacts {
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<CheckinEvent> checkins;  // time order
  ParseReport checkin_report;
  ParseReport taxi_report;
  GridSpec grid;
  Timestamp window_len = 3600;
  std::vector<TemporalContext> contexts;
  SpatialKG kg;
  KgEmbeddings embeddings;
  KgState kg_state;
  UserTable users;
  CategoryVectors category_vectors;
  std::vector<double> transd_loss;
};

struct TrainingCheckpoint {
  std::string fingerprint;
  std::uint64_t seed = 0;
  RewardBaselines baselines;
  std::size_t episodes_total = 0;
  TrainerState state;
};

void save_build(const std::string& path, const BuildArtifacts& artifacts);
BuildArtifacts load_build(const std::string& path);

void save_checkpoint(const std::string& path, const TrainingCheckpoint& ckpt);
TrainingCheckpoint load_checkpoint(const std::string& path);

// Reads only the header of either file kind.
struct FileHeader {
  std::string magic;
  std::uint32_t version = 0;
  std::string fingerprint;
  std::uint64_t seed = 0;
};
FileHeader read_header(const std::string& path);

}  // namespace rigl

#endif  // RIGL_CHECKPOINT_HPP_
