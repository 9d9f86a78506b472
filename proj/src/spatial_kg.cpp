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

#include "rigl/spatial_kg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace rigl {

std::size_t SpatialKG::poi_index(const std::string& id) const {
  auto it = poi_lookup.find(id);
  if (it == poi_lookup.end()) fail(ErrorKind::kLookup, "unknown POI id: " + id);
  return it->second;
}

std::vector<Triplet> SpatialKG::triplets() const {
  std::vector<Triplet> out;
  out.reserve(2 * num_pois());
  for (std::size_t p = 0; p < num_pois(); ++p) {
    out.push_back({p, kBelongTo, category_entity(poi_category[p])});
    out.push_back({p, kLocateAt, zone_entity(poi_zone[p])});
  }
  return out;
}

bool SpatialKG::is_true(const Triplet& t) const {
  if (t.head >= num_pois()) return false;
  if (t.relation == kBelongTo) return t.tail == category_entity(poi_category[t.head]);
  return t.tail == zone_entity(poi_zone[t.head]);
}

SpatialKG build_spatial_kg(std::span<const CheckinEvent> events, const GridSpec& grid) {
  if (events.empty()) fail(ErrorKind::kInvalidArgument, "cannot build a KG from zero events");
  grid.validate();

  struct PoiInfo {
    double lat = 0.0;
    double lon = 0.0;
    std::map<std::string, std::size_t> category_counts;
  };
  std::map<std::string, PoiInfo> pois;
  std::map<std::string, std::string> category_names;
  for (const auto& ev : events) {
    auto [it, inserted] = pois.try_emplace(ev.poi_id);
    if (inserted) {
      it->second.lat = ev.lat;
      it->second.lon = ev.lon;
    }
    ++it->second.category_counts[ev.category_id];
    category_names.try_emplace(ev.category_id, ev.category_name);
  }

  SpatialKG kg;
  for (const auto& [id, name] : category_names) {
    kg.category_lookup.emplace(id, kg.category_ids.size());
    kg.category_ids.push_back(id);
    kg.category_names.push_back(name);
  }

  std::vector<std::size_t> cells;
  for (const auto& [id, info] : pois) {
    kg.poi_lookup.emplace(id, kg.poi_ids.size());
    kg.poi_ids.push_back(id);
    kg.poi_lat.push_back(info.lat);
    kg.poi_lon.push_back(info.lon);
    // std::map iterates ids ascending, so strict '>' keeps the smallest on ties
    const std::string* best = nullptr;
    std::size_t best_n = 0;
    for (const auto& [cat, n] : info.category_counts) {
      if (n > best_n) {
        best = &cat;
        best_n = n;
      }
    }
    kg.poi_category.push_back(kg.category_lookup.at(*best));
    auto cell = cell_of(info.lat, info.lon, grid);
    if (!cell) {
      ++kg.pois_outside_bbox;
      cell = nearest_cell(info.lat, info.lon, grid);
    }
    cells.push_back(*cell);
  }
  if (kg.pois_outside_bbox > 0) {
    log_warn("kg_pois_outside_bbox",
             {{"count", static_cast<std::uint64_t>(kg.pois_outside_bbox)}});
  }

  kg.zone_cells = cells;
  std::sort(kg.zone_cells.begin(), kg.zone_cells.end());
  kg.zone_cells.erase(std::unique(kg.zone_cells.begin(), kg.zone_cells.end()),
                      kg.zone_cells.end());
  for (std::size_t cell : cells) {
    auto it = std::lower_bound(kg.zone_cells.begin(), kg.zone_cells.end(), cell);
    kg.poi_zone.push_back(static_cast<std::size_t>(it - kg.zone_cells.begin()));
  }

  kg.category_members.assign(kg.num_categories(), {});
  kg.zone_members.assign(kg.num_zones(), {});
  for (std::size_t p = 0; p < kg.num_pois(); ++p) {
    kg.category_members[kg.poi_category[p]].push_back(p);
    kg.zone_members[kg.poi_zone[p]].push_back(p);
  }
  return kg;
}

KgEmbeddings KgEmbeddings::random(std::size_t num_entities, std::size_t dim,
                                  std::uint64_t seed) {
  if (dim < 2) fail(ErrorKind::kConfig, "KG embedding dimension must be >= 2");
  KgEmbeddings emb;
  emb.dim = dim;
  emb.seed = seed;
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-bound, bound);
  const auto d = static_cast<Eigen::Index>(dim);
  emb.entity = Mat(d, static_cast<Eigen::Index>(num_entities));
  emb.relation = Mat(d, static_cast<Eigen::Index>(kNumRelations));
  for (Eigen::Index j = 0; j < emb.entity.cols(); ++j)
    for (Eigen::Index i = 0; i < d; ++i) emb.entity(i, j) = uni(rng);
  for (Eigen::Index j = 0; j < emb.relation.cols(); ++j)
    for (Eigen::Index i = 0; i < d; ++i) emb.relation(i, j) = uni(rng);
  emb.entity_proj = Mat::Zero(d, emb.entity.cols());
  emb.relation_proj = Mat::Zero(d, emb.relation.cols());
  return emb;
}

Vec KgEmbeddings::project(std::size_t e, Relation r) const {
  const auto ei = static_cast<Eigen::Index>(e);
  const auto ri = static_cast<Eigen::Index>(r);
  return entity.col(ei) + entity_proj.col(ei).dot(entity.col(ei)) * relation_proj.col(ri);
}

namespace {

void check_entity(const KgEmbeddings& emb, std::size_t e) {
  if (e >= static_cast<std::size_t>(emb.entity.cols())) {
    fail(ErrorKind::kLookup, "entity index " + std::to_string(e) + " out of range");
  }
}

Vec translation_residual(const Triplet& t, const KgEmbeddings& emb) {
  check_entity(emb, t.head);
  check_entity(emb, t.tail);
  if (t.relation >= kNumRelations) fail(ErrorKind::kLookup, "unknown relation");
  return emb.project(t.head, t.relation) + emb.relation.col(t.relation) -
         emb.project(t.tail, t.relation);
}

// d(||e||^2)/d(params) restricted to the columns one triplet touches.
struct ResidualGrad {
  Triplet t;
  Vec head, head_proj, tail, tail_proj, rel, rel_proj;
};

ResidualGrad residual_grad(const Triplet& t, const KgEmbeddings& emb) {
  const Vec g = 2.0 * translation_residual(t, emb);
  const auto h = static_cast<Eigen::Index>(t.head);
  const auto tl = static_cast<Eigen::Index>(t.tail);
  const auto r = static_cast<Eigen::Index>(t.relation);
  const double rp_g = emb.relation_proj.col(r).dot(g);
  const double hp_h = emb.entity_proj.col(h).dot(emb.entity.col(h));
  const double tp_t = emb.entity_proj.col(tl).dot(emb.entity.col(tl));
  ResidualGrad out{t, {}, {}, {}, {}, {}, {}};
  out.head = g + rp_g * emb.entity_proj.col(h);
  out.head_proj = rp_g * emb.entity.col(h);
  out.tail = -(g + rp_g * emb.entity_proj.col(tl));
  out.tail_proj = -rp_g * emb.entity.col(tl);
  out.rel = g;
  out.rel_proj = (hp_h - tp_t) * g;
  return out;
}

void add_scaled(KgEmbeddings& target, const ResidualGrad& g, double scale) {
  const auto h = static_cast<Eigen::Index>(g.t.head);
  const auto tl = static_cast<Eigen::Index>(g.t.tail);
  const auto r = static_cast<Eigen::Index>(g.t.relation);
  target.entity.col(h) += scale * g.head;
  target.entity_proj.col(h) += scale * g.head_proj;
  target.entity.col(tl) += scale * g.tail;
  target.entity_proj.col(tl) += scale * g.tail_proj;
  target.relation.col(r) += scale * g.rel;
  target.relation_proj.col(r) += scale * g.rel_proj;
}

KgEmbeddings zeros_like(const KgEmbeddings& emb) {
  KgEmbeddings z;
  z.dim = emb.dim;
  z.seed = emb.seed;
  z.entity = Mat::Zero(emb.entity.rows(), emb.entity.cols());
  z.entity_proj = Mat::Zero(emb.entity_proj.rows(), emb.entity_proj.cols());
  z.relation = Mat::Zero(emb.relation.rows(), emb.relation.cols());
  z.relation_proj = Mat::Zero(emb.relation_proj.rows(), emb.relation_proj.cols());
  return z;
}

}  // namespace

double transd_score(const Triplet& t, const KgEmbeddings& emb) {
  return -translation_residual(t, emb).squaredNorm();
}

double transd_score(std::size_t head, Relation r, std::size_t tail, const KgEmbeddings& emb) {
  return transd_score(Triplet{head, r, tail}, emb);
}

double margin_loss(const KgEmbeddings& emb, std::span<const TransdPair> pairs, double margin,
                   KgEmbeddings* grad) {
  if (grad != nullptr) *grad = zeros_like(emb);
  double total = 0.0;
  for (const auto& pair : pairs) {
    const double l =
        margin - transd_score(pair.positive, emb) + transd_score(pair.negative, emb);
    if (l <= 0.0) continue;
    total += l;
    if (grad != nullptr) {
      // score = -||e||^2, so dL = d||e_pos||^2 - d||e_neg||^2
      add_scaled(*grad, residual_grad(pair.positive, emb), +1.0);
      add_scaled(*grad, residual_grad(pair.negative, emb), -1.0);
    }
  }
  return total;
}

std::vector<Triplet> corruptions(const SpatialKG& kg, const Triplet& t) {
  std::vector<Triplet> out;
  for (std::size_t p = 0; p < kg.num_pois(); ++p) {
    Triplet c{p, t.relation, t.tail};
    if (!kg.is_true(c)) out.push_back(c);
  }
  const std::size_t first =
      t.relation == kBelongTo ? kg.category_entity(0) : kg.zone_entity(0);
  const std::size_t count = t.relation == kBelongTo ? kg.num_categories() : kg.num_zones();
  for (std::size_t i = 0; i < count; ++i) {
    Triplet c{t.head, t.relation, first + i};
    if (!kg.is_true(c)) out.push_back(c);
  }
  return out;
}

double full_margin_loss(const SpatialKG& kg, const KgEmbeddings& emb, double margin) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& t : kg.triplets()) {
    const double pos = transd_score(t, emb);
    for (const auto& c : corruptions(kg, t)) {
      total += std::max(0.0, margin - pos + transd_score(c, emb));
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

namespace {

std::optional<Triplet> sample_corruption(const SpatialKG& kg, const Triplet& t,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool corrupt_tail = coin(rng) < 0.5;
  const std::size_t tail_first =
      t.relation == kBelongTo ? kg.category_entity(0) : kg.zone_entity(0);
  const std::size_t tail_count =
      t.relation == kBelongTo ? kg.num_categories() : kg.num_zones();
  constexpr int kAttempts = 32;
  for (int side = 0; side < 2; ++side) {
    const bool tail_side = (side == 0) == corrupt_tail;
    const std::size_t n = tail_side ? tail_count : kg.num_pois();
    if (n < 2) continue;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int a = 0; a < kAttempts; ++a) {
      Triplet c = t;
      if (tail_side) {
        c.tail = tail_first + pick(rng);
      } else {
        c.head = pick(rng);
      }
      if (!kg.is_true(c)) return c;
    }
  }
  return std::nullopt;
}

// One SGD step on a single (positive, negative) pair; both gradients are
// taken at the pre-step parameters.
double sgd_pair_step(KgEmbeddings& emb, const TransdPair& pair, double margin, double lr) {
  const double l =
      margin - transd_score(pair.positive, emb) + transd_score(pair.negative, emb);
  if (!(l > 0.0)) return std::isfinite(l) ? 0.0 : l;
  const ResidualGrad pos = residual_grad(pair.positive, emb);
  const ResidualGrad neg = residual_grad(pair.negative, emb);
  add_scaled(emb, pos, -lr);
  add_scaled(emb, neg, +lr);
  return l;
}

}  // namespace

KgEmbeddings train_transd(const SpatialKG& kg, const TransdConfig& config,
                          std::vector<double>* loss_history) {
  if (kg.num_pois() == 0) fail(ErrorKind::kInvalidArgument, "empty knowledge graph");
  KgEmbeddings emb = KgEmbeddings::random(kg.num_entities(), config.dim, config.seed);
  if (loss_history != nullptr) loss_history->clear();

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  auto triplets = kg.triplets();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(triplets.begin(), triplets.end(), rng);
    double epoch_loss = 0.0;
    for (const auto& t : triplets) {
      for (std::size_t k = 0; k < config.neg_per_pos; ++k) {
        auto neg = sample_corruption(kg, t, rng);
        if (!neg) continue;
        const double l = sgd_pair_step(emb, TransdPair{t, *neg}, config.margin, config.lr);
        if (!std::isfinite(l)) {
          fail(ErrorKind::kNumeric, "TransD loss became non-finite at epoch " +
                                        std::to_string(epoch) + " (lr=" +
                                        std::to_string(config.lr) + ")");
        }
        epoch_loss += l;
      }
    }
    for (Eigen::Index j = 0; j < emb.entity.cols(); ++j) {
      const double n = emb.entity.col(j).norm();
      if (n > 0.0) emb.entity.col(j) /= n;
    }
    if (loss_history != nullptr) {
      loss_history->push_back(full_margin_loss(kg, emb, config.margin));
    }
    log_info("transd_epoch", {{"epoch", static_cast<std::uint64_t>(epoch)},
                              {"sampled_loss", epoch_loss}});
  }
  return emb;
}

KgState export_initial_state(const KgEmbeddings& emb, const SpatialKG& kg) {
  if (static_cast<std::size_t>(emb.entity.cols()) != kg.num_entities()) {
    fail(ErrorKind::kInvalidArgument, "embedding table does not match the KG");
  }
  const auto d = static_cast<Eigen::Index>(emb.dim);
  KgState s;
  s.heads = Mat(d, static_cast<Eigen::Index>(kg.num_pois()));
  s.tails = Mat(d, static_cast<Eigen::Index>(kg.num_tails()));
  for (std::size_t p = 0; p < kg.num_pois(); ++p) {
    s.heads.col(static_cast<Eigen::Index>(p)) =
        0.5 * (emb.project(p, kBelongTo) + emb.project(p, kLocateAt));
  }
  for (std::size_t c = 0; c < kg.num_categories(); ++c) {
    s.tails.col(static_cast<Eigen::Index>(kg.category_tail(c))) =
        emb.project(kg.category_entity(c), kBelongTo);
  }
  for (std::size_t z = 0; z < kg.num_zones(); ++z) {
    s.tails.col(static_cast<Eigen::Index>(kg.zone_tail(z))) =
        emb.project(kg.zone_entity(z), kLocateAt);
  }
  s.relations = emb.relation;
  return s;
}

}  // namespace rigl
