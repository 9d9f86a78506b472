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

// Spatial knowledge graph (POI -belong_to-> category, POI -locate_at-> zone)
// and its TransD embeddings.

#ifndef RIGL_SPATIAL_KG_HPP_
#define RIGL_SPATIAL_KG_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rigl/common.hpp"
#include "rigl/ingest.hpp"

namespace rigl {

enum Relation : std::size_t { kBelongTo = 0, kLocateAt = 1 };
inline constexpr std::size_t kNumRelations = 2;

struct Triplet {
  std::size_t head;  // entity index
  Relation relation;
  std::size_t tail;  // entity index
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Entities are numbered POIs first, then categories, then zones. POIs are
// sorted by id, categories by category id, zones by grid cell.
struct SpatialKG {
  std::vector<std::string> poi_ids;
  std::vector<double> poi_lat;
  std::vector<double> poi_lon;
  std::vector<std::size_t> poi_category;  // category index per POI
  std::vector<std::size_t> poi_zone;      // zone index per POI

  std::vector<std::string> category_ids;
  std::vector<std::string> category_names;
  std::vector<std::size_t> zone_cells;  // grid cell per zone

  std::vector<std::vector<std::size_t>> category_members;  // ascending POI index
  std::vector<std::vector<std::size_t>> zone_members;

  std::map<std::string, std::size_t> poi_lookup;
  std::map<std::string, std::size_t> category_lookup;

  std::size_t pois_outside_bbox = 0;

  std::size_t num_pois() const { return poi_ids.size(); }
  std::size_t num_categories() const { return category_ids.size(); }
  std::size_t num_zones() const { return zone_cells.size(); }
  std::size_t num_tails() const { return num_categories() + num_zones(); }
  std::size_t num_entities() const { return num_pois() + num_tails(); }

  std::size_t category_entity(std::size_t c) const { return num_pois() + c; }
  std::size_t zone_entity(std::size_t z) const { return num_pois() + num_categories() + z; }
  // Index into the tail table (categories then zones).
  std::size_t category_tail(std::size_t c) const { return c; }
  std::size_t zone_tail(std::size_t z) const { return num_categories() + z; }

  std::size_t poi_index(const std::string& id) const;

  // Every POI contributes one belong_to then one locate_at triplet.
  std::vector<Triplet> triplets() const;
  bool is_true(const Triplet& t) const;
};

// One POI per distinct poi_id, majority category (ties -> smallest category
// id), zone = grid cell of its first observed coordinates. POIs outside the
// box are snapped to the nearest boundary cell and counted.
SpatialKG build_spatial_kg(std::span<const CheckinEvent> events, const GridSpec& grid);

struct KgEmbeddings {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  Mat entity;        // dim x E
  Mat entity_proj;   // dim x E
  Mat relation;      // dim x 2
  Mat relation_proj; // dim x 2

  static KgEmbeddings random(std::size_t num_entities, std::size_t dim, std::uint64_t seed);

  // M_r e = e + (p_e . e) p_r
  Vec project(std::size_t entity_index, Relation r) const;
};

// -|| h_perp + r - t_perp ||^2
double transd_score(std::size_t head, Relation r, std::size_t tail, const KgEmbeddings& emb);
double transd_score(const Triplet& t, const KgEmbeddings& emb);

struct TransdPair {
  Triplet positive;
  Triplet negative;
};

// Sum over pairs of max(0, margin - score(pos) + score(neg)). When `grad` is
// non-null it receives the gradient with the same layout as the embeddings.
double margin_loss(const KgEmbeddings& emb, std::span<const TransdPair> pairs, double margin,
                   KgEmbeddings* grad = nullptr);

struct TransdConfig {
  std::size_t dim = 200;
  std::size_t epochs = 100;
  double lr = 0.01;
  double margin = 1.0;
  std::size_t neg_per_pos = 1;
  std::uint64_t seed = 7;
};

// All type-compatible corruptions of `t` (heads over POIs, tails over the
// relation's tail type) that are not themselves true triplets.
std::vector<Triplet> corruptions(const SpatialKG& kg, const Triplet& t);

// Mean hinge over every (true triplet, corruption) pair.
double full_margin_loss(const SpatialKG& kg, const KgEmbeddings& emb, double margin);

// SGD on the margin ranking loss with filtered uniform negatives (tail with
// probability 0.5, head otherwise). Entity vectors are renormalised to unit
// length after every epoch. `loss_history`, if given, receives
// full_margin_loss after each epoch.
KgEmbeddings train_transd(const SpatialKG& kg, const TransdConfig& config,
                          std::vector<double>* loss_history = nullptr);

// Mutable KG part of the RL state. Columns are vectors.
struct KgState {
  Mat heads;      // dim x P
  Mat tails;      // dim x (C + Z)
  Mat relations;  // dim x 2

  std::size_t dim() const { return static_cast<std::size_t>(heads.rows()); }
  friend bool operator==(const KgState& a, const KgState& b) {
    return a.heads.rows() == b.heads.rows() && a.heads.cols() == b.heads.cols() &&
           a.tails.cols() == b.tails.cols() && a.relations.cols() == b.relations.cols() &&
           a.heads == b.heads && a.tails == b.tails && a.relations == b.relations;
  }
};

// Heads take the mean of their two relation-specific projections, tails the
// projection under their own relation, relations their raw vectors.
KgState export_initial_state(const KgEmbeddings& emb, const SpatialKG& kg);

}  // namespace rigl

#endif  // RIGL_SPATIAL_KG_HPP_
