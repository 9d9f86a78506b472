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

#include "rigl/checkpoint.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/array.hpp>
#include <cereal/types/map.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/utility.hpp>
#include <cereal/types/vector.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rigl {
namespace {

constexpr const char* kBuildMagic = "RIGL-BUILD";
constexpr const char* kCheckpointMagic = "RIGL-CKPT";

template <class Archive>
void save_matrix(Archive& ar, const Mat& m) {
  const auto rows = static_cast<std::uint64_t>(m.rows());
  const auto cols = static_cast<std::uint64_t>(m.cols());
  ar(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) ar(m.data()[i]);
}

template <class Archive>
void load_matrix(Archive& ar, Mat& m) {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  ar(rows, cols);
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) fail(ErrorKind::kIo, "corrupt matrix header");
  m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) ar(m.data()[i]);
}

template <class Archive>
void save_vector(Archive& ar, const Vec& v) {
  ar(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) ar(v(i));
}

template <class Archive>
void load_vector(Archive& ar, Vec& v) {
  std::uint64_t n = 0;
  ar(n);
  if (n > (1ULL << 32)) fail(ErrorKind::kIo, "corrupt vector header");
  v.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) ar(v(i));
}

// One function per type, used for both directions.
template <class Archive, bool kSave>
struct Codec {
  Archive& ar;

  void mat(Mat& m) {
    if constexpr (kSave) save_matrix(ar, m); else load_matrix(ar, m);
  }
  void vec(Vec& v) {
    if constexpr (kSave) save_vector(ar, v); else load_vector(ar, v);
  }
  void size(std::size_t& n) {
    std::uint64_t w = n;
    ar(w);
    n = static_cast<std::size_t>(w);
  }
  void sizes(std::vector<std::size_t>& v) {
    std::vector<std::uint64_t> w(v.begin(), v.end());
    ar(w);
    v.assign(w.begin(), w.end());
  }

  void checkin(CheckinEvent& e) {
    ar(e.user_id, e.poi_id, e.category_id, e.category_name, e.lat, e.lon, e.timestamp);
  }
  void report(ParseReport& r) {
    size(r.total_rows);
    size(r.valid_rows);
    size(r.skipped_rows);
    ar(r.path);
    std::map<std::string, std::uint64_t> reasons(r.skip_reasons.begin(), r.skip_reasons.end());
    ar(reasons);
    r.skip_reasons.clear();
    for (const auto& [k, v] : reasons) r.skip_reasons[k] = static_cast<std::size_t>(v);
  }
  void grid(GridSpec& g) {
    ar(g.lat_min, g.lat_max, g.lon_min, g.lon_max);
    size(g.rows);
    size(g.cols);
  }
  void context(TemporalContext& c) {
    ar(c.window_id, c.start, c.end);
    mat(c.traffic);
  }
  void kg(SpatialKG& k) {
    ar(k.poi_ids, k.poi_lat, k.poi_lon);
    sizes(k.poi_category);
    sizes(k.poi_zone);
    ar(k.category_ids, k.category_names);
    sizes(k.zone_cells);
    std::size_t n = k.category_members.size();
    size(n);
    k.category_members.resize(n);
    for (auto& m : k.category_members) sizes(m);
    n = k.zone_members.size();
    size(n);
    k.zone_members.resize(n);
    for (auto& m : k.zone_members) sizes(m);
    size(k.pois_outside_bbox);
    if constexpr (!kSave) {
      k.poi_lookup.clear();
      k.category_lookup.clear();
      for (std::size_t i = 0; i < k.poi_ids.size(); ++i) k.poi_lookup[k.poi_ids[i]] = i;
      for (std::size_t i = 0; i < k.category_ids.size(); ++i) {
        k.category_lookup[k.category_ids[i]] = i;
      }
    }
  }
  void embeddings(KgEmbeddings& e) {
    size(e.dim);
    ar(e.seed);
    mat(e.entity);
    mat(e.entity_proj);
    mat(e.relation);
    mat(e.relation_proj);
  }
  void kg_state(KgState& s) {
    mat(s.heads);
    mat(s.tails);
    mat(s.relations);
  }
  void users(UserTable& u) {
    ar(u.user_ids, u.seed, u.method);
    mat(u.vectors);
  }
  void category_vectors(CategoryVectors& c) {
    Mat m = c.vectors();
    mat(m);
    if constexpr (!kSave) c = CategoryVectors(std::move(m));
  }
  void network(QNetwork& q) {
    std::size_t n = q.layers().size();
    size(n);
    std::vector<DenseLayer> layers = q.layers();
    layers.resize(n);
    for (auto& l : layers) {
      mat(l.w);
      vec(l.b);
    }
    if constexpr (!kSave) q = QNetwork(std::move(layers));
  }
  void gates(GateParams& g) {
    for (auto& w : g.gate_w) vec(w);
    ar(g.gate_b);
    mat(g.user_mix);
    mat(g.poi_mix);
    mat(g.context_proj);
  }
  void transition(Transition& t) {
    vec(t.state);
    size(t.action);
    ar(t.reward);
    vec(t.next_state);
    ar(t.priority);
  }
  void memory(ReplayMemory& m) {
    std::size_t capacity = m.capacity();
    std::size_t head = m.head();
    std::uint64_t inserted = m.inserted();
    size(capacity);
    size(head);
    ar(inserted);
    std::vector<Transition> ring = m.ring();
    std::size_t n = ring.size();
    size(n);
    ring.resize(n);
    for (auto& t : ring) transition(t);
    if constexpr (!kSave) m = ReplayMemory::restore(capacity, std::move(ring), head, inserted);
  }
  void episode(EpisodeRecord& r) {
    size(r.episode);
    size(r.steps);
    size(r.train_steps);
    ar(r.mean_loss, r.mean_reward, r.accuracy, r.mean_dist_km, r.epsilon);
  }
  void trainer(TrainerState& s) {
    network(s.q_e);
    network(s.q_t);
    gates(s.gates);
    memory(s.memory);
    std::string rng;
    if constexpr (kSave) {
      std::ostringstream os;
      os << s.rng;
      rng = os.str();
    }
    ar(rng);
    if constexpr (!kSave) {
      std::istringstream is(rng);
      is >> s.rng;
      if (!is) fail(ErrorKind::kIo, "corrupt generator state in checkpoint");
    }
    ar(s.step);
    size(s.episodes_done);
    std::size_t n = s.log.size();
    size(n);
    s.log.resize(n);
    for (auto& r : s.log) episode(r);
  }

  void build(BuildArtifacts& b) {
    std::size_t n = b.checkins.size();
    size(n);
    b.checkins.resize(n);
    for (auto& e : b.checkins) checkin(e);
    report(b.checkin_report);
    report(b.taxi_report);
    grid(b.grid);
    ar(b.window_len);
    n = b.contexts.size();
    size(n);
    b.contexts.resize(n);
    for (auto& c : b.contexts) context(c);
    kg(b.kg);
    embeddings(b.embeddings);
    kg_state(b.kg_state);
    users(b.users);
    category_vectors(b.category_vectors);
    ar(b.transd_loss);
  }
  void checkpoint(TrainingCheckpoint& c) {
    ar(c.baselines.d, c.baselines.c, c.baselines.p);
    size(c.episodes_total);
    trainer(c.state);
  }
};

void write_file(const std::string& path, const std::string& bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename Fn>
std::string encode(const char* magic, const std::string& fingerprint, std::uint64_t seed,
                   Fn&& body) {
  std::ostringstream os(std::ios::binary);
  {
    cereal::PortableBinaryOutputArchive ar(os);
    ar(std::string(magic), kFormatVersion, fingerprint, seed);
    Codec<cereal::PortableBinaryOutputArchive, true> codec{ar};
    body(codec);
  }
  return os.str();
}

template <typename Fn>
FileHeader decode(const std::string& path, const char* magic, Fn&& body) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  FileHeader h;
  try {
    cereal::PortableBinaryInputArchive ar(in);
    ar(h.magic, h.version, h.fingerprint, h.seed);
    if (magic != nullptr && h.magic != magic) {
      fail(ErrorKind::kIo, path + " is not a " + std::string(magic) + " file");
    }
    if (h.version != kFormatVersion) {
      fail(ErrorKind::kIo, path + " has unsupported format version " + std::to_string(h.version));
    }
    Codec<cereal::PortableBinaryInputArchive, false> codec{ar};
    body(codec);
  } catch (const cereal::Exception& e) {
    fail(ErrorKind::kIo, "truncated or corrupt file " + path + ": " + e.what());
  }
  return h;
}

}  // namespace

void save_build(const std::string& path, const BuildArtifacts& artifacts) {
  BuildArtifacts copy = artifacts;
  write_file(path, encode(kBuildMagic, artifacts.fingerprint, artifacts.seed,
                          [&](auto& codec) { codec.build(copy); }));
}

BuildArtifacts load_build(const std::string& path) {
  BuildArtifacts b;
  const FileHeader h = decode(path, kBuildMagic, [&](auto& codec) { codec.build(b); });
  b.fingerprint = h.fingerprint;
  b.seed = h.seed;
  return b;
}

void save_checkpoint(const std::string& path, const TrainingCheckpoint& ckpt) {
  TrainingCheckpoint copy = ckpt;
  write_file(path, encode(kCheckpointMagic, ckpt.fingerprint, ckpt.seed,
                          [&](auto& codec) { codec.checkpoint(copy); }));
}

TrainingCheckpoint load_checkpoint(const std::string& path) {
  TrainingCheckpoint c;
  const FileHeader h = decode(path, kCheckpointMagic, [&](auto& codec) { codec.checkpoint(c); });
  c.fingerprint = h.fingerprint;
  c.seed = h.seed;
  return c;
}

FileHeader read_header(const std::string& path) {
  return decode(path, nullptr, [](auto&) {});
}

}  // namespace rigl
