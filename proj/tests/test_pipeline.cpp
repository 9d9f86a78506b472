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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rigl/pipeline.hpp"
#include "test_util.hpp"

using namespace rigl;
namespace fs = std::filesystem;

namespace {

RunConfig smoke_config(const test::TempDir& dir) {
  ::unsetenv("RIGL_CACHE_DIR");
  RunConfig cfg = load_config(test::data_path("smoke.json"));
  cfg.tree["output_dir"] = dir.str();
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Rows of a tab-separated artifact, skipping its '#' header line.
std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing and overrides") {
  auto cfg = parse_config(R"({"agent": {"lr": 0.5}})", "/tmp");
  CHECK(cfg.tree["agent"]["lr"] == 0.5);
  CHECK(cfg.tree["agent"]["batch"] == default_config()["agent"]["batch"]);
  CHECK(cfg.tree["seed"] == 7);
  CHECK(kind_of([] { parse_config(R"({"agnet": {}})", "/tmp"); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { parse_config("{not json", "/tmp"); }) == ErrorKind::kConfig);

  set_override(cfg, "agent.hidden", "[4,2]");
  CHECK(cfg.tree["agent"]["hidden"] == nlohmann::json::array({4, 2}));
  set_override(cfg, "policy", "dqn");
  CHECK(cfg.tree["policy"] == "dqn");
  set_override(cfg, "reward.lambda.d", "0.25");
  CHECK(cfg.tree["reward"]["lambda"]["d"] == 0.25);
  CHECK(kind_of([&] { set_override(cfg, "agent.nope", "1"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { set_override(cfg, "", "1"); }) == ErrorKind::kConfig);
}

TEST_CASE("validation") {
  test::TempDir dir("cfg");
  auto good = smoke_config(dir);
  CHECK_NOTHROW(validate_config(good));

  auto missing = good;
  missing.tree["taxi"]["path"] = "no_such_taxi.csv";
  try {
    validate_config(missing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
    CHECK(std::string(e.what()).find("no_such_taxi.csv") != std::string::npos);
  }
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"dims.user", "4"}, {"policy", "a2c"}, {"update", "up3"}, {"priority", "rank"},
           {"reward.variant", "r3"}, {"grid.lat_min", "null"}, {"agent.gamma", "1.5"},
           {"profile.method", "magic"}, {"split.train_fraction", "0"}}) {
    auto bad = good;
    set_override(bad, key, value);
    CAPTURE(key);
    CHECK_THROWS_AS(validate_config(bad), Error);
  }
}

TEST_CASE("fingerprints") {
  test::TempDir dir("fp");
  auto a = smoke_config(dir);
  auto b = a;
  b.tree["output_dir"] = "/elsewhere";
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(build_fingerprint(a) == build_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 16);
  set_override(b, "agent.lr", "0.5");
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(build_fingerprint(a) == build_fingerprint(b));
  set_override(b, "grid.rows", "4");
  CHECK(build_fingerprint(a) != build_fingerprint(b));
  CHECK(derive_seed(1, "agent") != derive_seed(1, "users"));
  CHECK(derive_seed(1, "agent") == derive_seed(1, "agent"));
}

TEST_CASE("build cache") {
  test::TempDir dir("build");
  auto cfg = smoke_config(dir);
  auto first = cmd_build(cfg);
  CHECK_FALSE(first.cache_hit);
  CHECK(fs::exists(first.path));
  CHECK(fs::path(first.path).parent_path() == fs::path(dir.str()) / "cache");
  auto second = cmd_build(cfg);
  CHECK(second.cache_hit);
  CHECK(second.path == first.path);
  CHECK(second.artifacts->kg_state == first.artifacts->kg_state);
  CHECK(second.artifacts->users.vectors == first.artifacts->users.vectors);

  set_override(cfg, "grid.rows", "2");
  auto third = cmd_build(cfg);
  CHECK_FALSE(third.cache_hit);
  CHECK(third.path != first.path);

  ::setenv("RIGL_CACHE_DIR", (dir.str() + "/elsewhere").c_str(), 1);
  CHECK(cache_dir(cfg) == dir.str() + "/elsewhere");
  ::unsetenv("RIGL_CACHE_DIR");

  auto missing = smoke_config(dir);
  missing.tree["checkins"]["path"] = "absent.csv";
  CHECK(kind_of([&] { cmd_build(missing); }) == ErrorKind::kIo);
}

TEST_CASE("train, resume and evaluate") {
  test::TempDir dir("train");
  auto cfg = smoke_config(dir);
  auto full = cmd_train(cfg);
  CHECK(full.finished);
  CHECK(full.episodes_done == 3);
  const std::string full_ckpt = slurp(full.checkpoint_path);
  const std::string full_log = slurp(full.log_path);
  CHECK(read_tsv(full.log_path).size() == 1 + 3);

  test::TempDir dir2("resume");
  auto cfg2 = smoke_config(dir2);
  auto part = cmd_train(cfg2, {"", 1});
  CHECK_FALSE(part.finished);
  CHECK(part.episodes_done == 1);
  auto rest = cmd_train(cfg2, {part.checkpoint_path, std::nullopt});
  CHECK(rest.finished);
  CHECK(slurp(rest.checkpoint_path) == full_ckpt);
  CHECK(slurp(rest.log_path) == full_log);

  auto other = cfg2;
  set_override(other, "agent.lr", "0.5");
  CHECK(kind_of([&] { cmd_train(other, {rest.checkpoint_path, std::nullopt}); }) ==
        ErrorKind::kState);

  auto rep = cmd_eval(cfg);
  CHECK(rep.predictions > 0);
  CHECK(rep.prec_cat >= 0.0);
  CHECK(rep.prec_cat <= 1.0);
  CHECK(rep.rec_cat <= 1.0);
  CHECK(rep.avg_dist_km >= 0.0);
  CHECK(rep.fingerprint == config_fingerprint(cfg));

  const auto json = nlohmann::json::parse(slurp(dir.str() + "/eval/report.json"));
  for (const char* key : {"prec_cat", "rec_cat", "avg_sim", "avg_dist_km", "accuracy",
                          "predictions", "skipped_users", "skipped_events", "per_user",
                          "fingerprint"}) {
    CAPTURE(key);
    CHECK(json.contains(key));
  }
  CHECK(json["per_user"].size() == rep.per_user.size());

  const auto pairs = read_tsv(dir.str() + "/eval/pairs.tsv");
  REQUIRE(pairs.size() == rep.predictions + 1);
  double dist = 0.0;
  for (std::size_t i = 1; i < pairs.size(); ++i) dist += std::stod(pairs[i].at(7));
  CHECK(dist / rep.predictions == doctest::Approx(rep.avg_dist_km).epsilon(1e-12));

  const auto table = read_tsv(dir.str() + "/eval/report.tsv");
  REQUIRE(table.size() == 2);
  CHECK(std::stod(table[1][0]) == rep.prec_cat);
}

TEST_CASE("oracle evaluation and missing checkpoints") {
  test::TempDir dir("oracle");
  auto cfg = smoke_config(dir);
  CHECK(kind_of([&] { cmd_eval(cfg); }) == ErrorKind::kIo);
  auto rep = cmd_eval(cfg, {"", true, true});
  CHECK(rep.prec_cat == 1.0);
  CHECK(rep.rec_cat == 1.0);
  CHECK(rep.avg_sim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.avg_dist_km == 0.0);
  CHECK(fs::exists(dir.str() + "/eval_oracle/report.json"));
}

TEST_CASE("calibration report") {
  test::TempDir dir("calib");
  auto cfg = smoke_config(dir);
  auto rep = cmd_calibrate(cfg);
  CHECK(rep.rounds == 4);
  CHECK(rep.samples > 0);
  CHECK(rep.baselines.d >= rep.min.d);
  CHECK(rep.baselines.d <= rep.max.d);
  CHECK(fs::exists(dir.str() + "/calibration.json"));
}

TEST_CASE("sweep") {
  CHECK(parse_axis("policy=dqn,ddqn").values == std::vector<std::string>{"dqn", "ddqn"});
  CHECK(parse_axis(R"(agent.hidden=[[4],[8,4]])").values ==
        std::vector<std::string>{"[4]", "[8,4]"});
  CHECK_THROWS_AS(parse_axis("policy"), Error);

  test::TempDir dir("sweep");
  auto cfg = smoke_config(dir);
  set_override(cfg, "agent.episodes", "1");
  auto out = cmd_sweep(cfg, {parse_axis("policy=dqn,ddqn"), parse_axis("update=up1,up2")});
  CHECK(out.points == 4);
  CHECK(out.rows == 4 * 5);
  const auto rows = read_tsv(out.table_path);
  REQUIRE(rows.size() == 1 + 20);
  CHECK(rows[0] == std::vector<std::string>{"point", "policy", "update", "fingerprint", "metric",
                                            "value"});
  // Point 1 is (dqn, up2) with the first axis slowest.
  CHECK(rows[6][1] == "dqn");
  CHECK(rows[6][2] == "up2");

  test::TempDir solo_dir("solo");
  auto solo = smoke_config(solo_dir);
  set_override(solo, "agent.episodes", "1");
  set_override(solo, "policy", "dqn");
  set_override(solo, "update", "up2");
  cmd_train(solo);
  const auto rep = cmd_eval(solo);
  CHECK(rows[6][3] == rep.fingerprint);
  const std::map<std::string, double> expect{{"prec_cat", rep.prec_cat},
                                              {"rec_cat", rep.rec_cat},
                                              {"avg_sim", rep.avg_sim},
                                              {"avg_dist_km", rep.avg_dist_km},
                                              {"accuracy", rep.accuracy}};
  for (std::size_t r = 6; r < 11; ++r) {
    CAPTURE(rows[r][4]);
    CHECK(std::stod(rows[r][5]) == expect.at(rows[r][4]));
  }

  CHECK(kind_of([&] { cmd_sweep(cfg, {}); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { cmd_sweep(cfg, {parse_axis("output_dir=a,b")}); }) == ErrorKind::kConfig);
}

}  // TEST_SUITE

TEST_SUITE("checkpoint") {

TEST_CASE("build artifacts round trip") {
  test::TempDir dir("ckb");
  auto cfg = smoke_config(dir);
  const auto built = cmd_build(cfg);
  const BuildArtifacts& a = *built.artifacts;
  save_build(dir.file("copy.bin"), a);
  const BuildArtifacts b = load_build(dir.file("copy.bin"));
  CHECK(b.fingerprint == a.fingerprint);
  CHECK(b.seed == a.seed);
  CHECK(b.checkins.size() == a.checkins.size());
  CHECK(b.checkins.back().poi_id == a.checkins.back().poi_id);
  CHECK(b.checkins.back().timestamp == a.checkins.back().timestamp);
  CHECK(b.kg.poi_ids == a.kg.poi_ids);
  CHECK(b.kg.triplets() == a.kg.triplets());
  CHECK(b.kg_state == a.kg_state);
  CHECK(b.embeddings.entity == a.embeddings.entity);
  CHECK(b.users.user_ids == a.users.user_ids);
  CHECK(b.users.vectors == a.users.vectors);
  CHECK(b.category_vectors.vectors() == a.category_vectors.vectors());
  CHECK(b.transd_loss == a.transd_loss);
  REQUIRE(b.contexts.size() == a.contexts.size());
  for (std::size_t i = 0; i < a.contexts.size(); ++i) {
    CHECK(b.contexts[i].traffic == a.contexts[i].traffic);
  }
  save_build(dir.file("again.bin"), b);
  CHECK(slurp(dir.file("again.bin")) == slurp(dir.file("copy.bin")));

  const auto h = read_header(dir.file("copy.bin"));
  CHECK(h.version == kFormatVersion);
  CHECK(h.fingerprint == a.fingerprint);
  CHECK(h.seed == a.seed);
}

TEST_CASE("training checkpoint round trip") {
  test::TempDir dir("ckt");
  auto cfg = smoke_config(dir);
  const auto out = cmd_train(cfg);
  const TrainingCheckpoint c = load_checkpoint(out.checkpoint_path);
  CHECK(c.episodes_total == 3);
  CHECK(c.state.episodes_done == 3);
  CHECK(c.state.log.size() == 3);
  save_checkpoint(dir.file("copy.bin"), c);
  const TrainingCheckpoint d = load_checkpoint(dir.file("copy.bin"));
  CHECK(d.state.q_e == c.state.q_e);
  CHECK(d.state.q_t == c.state.q_t);
  CHECK(d.state.gates == c.state.gates);
  CHECK(d.state.rng == c.state.rng);
  CHECK(d.state.log == c.state.log);
  CHECK(d.state.memory.size() == c.state.memory.size());
  CHECK(d.baselines.d == c.baselines.d);
  CHECK(slurp(dir.file("copy.bin")) == slurp(out.checkpoint_path));
}

TEST_CASE("damaged files") {
  test::TempDir dir("ckd");
  auto cfg = smoke_config(dir);
  const auto out = cmd_train(cfg);
  const std::string bytes = slurp(out.checkpoint_path);
  std::ofstream(dir.file("short.bin"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK(kind_of([&] { load_checkpoint(dir.file("short.bin")); }) == ErrorKind::kIo);
  CHECK(kind_of([&] { load_checkpoint(dir.file("absent.bin")); }) == ErrorKind::kIo);
  const auto build = cmd_build(cfg);
  CHECK(kind_of([&] { load_checkpoint(build.path); }) == ErrorKind::kIo);
  CHECK(kind_of([&] { load_build(out.checkpoint_path); }) == ErrorKind::kIo);
  std::ofstream(dir.file("junk.bin"), std::ios::binary) << "hello";
  CHECK(kind_of([&] { read_header(dir.file("junk.bin")); }) == ErrorKind::kIo);
}

}  // TEST_SUITE
