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

// Command-line front end. Talks to the library only through rigl.h.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rigl/rigl.h"

namespace {

struct ConfigDeleter {
  void operator()(rigl_config* c) const { rigl_config_free(c); }
};
using ConfigPtr = std::unique_ptr<rigl_config, ConfigDeleter>;

// Exit codes: 0 success, 1 usage, 10 + status for library failures.
int report(rigl_status s) {
  if (s == RIGL_OK) return 0;
  std::fprintf(stderr, "rigl: %s: %s\n", rigl_status_string(s), rigl_last_error());
  return 10 + static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIGL mobile user profiling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rigl_version()));

  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "JSON config file")->required();
  app.add_option("--set", overrides, "Override a config key: key=value (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Suppress info log lines");

  auto* build = app.add_subcommand("build", "Parse inputs, build the KG and user states");
  auto* calibrate = app.add_subcommand("calibrate", "Estimate reward baselines");

  auto* train = app.add_subcommand("train", "Train the agent");
  std::string resume;
  std::int64_t stop_after = -1;
  train->add_option("--resume", resume, "Continue from this checkpoint");
  train->add_option("--stop-after", stop_after, "Run at most this many episodes now");

  auto* eval = app.add_subcommand("eval", "Evaluate on the held-out shard");
  std::string checkpoint;
  bool oracle = false;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default <output_dir>/checkpoint.bin)");
  eval->add_flag("--oracle", oracle, "Predict the true POI (metric sanity bound)");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a grid of settings");
  std::vector<std::string> axes;
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)")->required();

  auto* show = app.add_subcommand("config", "Print the effective config and its fingerprint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version surface as "successful" parse errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  rigl_set_log_quiet(quiet ? 1 : 0);

  rigl_config* raw = nullptr;
  if (int rc = report(rigl_config_load(config_path.c_str(), &raw))) return rc;
  ConfigPtr cfg(raw);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "rigl: --set expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (int rc = report(rigl_config_set(cfg.get(), key.c_str(), value.c_str()))) return rc;
  }

  if (*show) {
    size_t needed = 0;
    if (int rc = report(rigl_config_dump(cfg.get(), nullptr, 0, &needed))) return rc;
    std::string text(needed, '\0');
    if (int rc = report(rigl_config_dump(cfg.get(), text.data(), text.size(), &needed))) return rc;
    char fp[17];
    if (int rc = report(rigl_config_fingerprint(cfg.get(), fp, sizeof fp))) return rc;
    std::printf("%s\nfingerprint %s\n", text.c_str(), fp);
    return 0;
  }
  if (*build) {
    rigl_build_info info{};
    if (int rc = report(rigl_build(cfg.get(), &info))) return rc;
    std::printf("%s %s\nevents %zu users %zu pois %zu categories %zu zones %zu windows %zu\n",
                info.cache_hit ? "cached" : "built", info.path, info.events, info.users, info.pois,
                info.categories, info.zones, info.windows);
    return 0;
  }
  if (*calibrate) {
    rigl_calibration cal{};
    if (int rc = report(rigl_calibrate(cfg.get(), &cal))) return rc;
    std::printf("baselines d=%.10g c=%.10g p=%.10g (samples %zu, rounds %zu)\n", cal.d, cal.c,
                cal.p, cal.samples, cal.rounds);
    return 0;
  }
  if (*train) {
    rigl_train_options opts{resume.empty() ? nullptr : resume.c_str(), stop_after};
    rigl_train_result res{};
    if (int rc = report(rigl_train(cfg.get(), &opts, &res))) return rc;
    std::printf("episodes %zu/%zu%s\ncheckpoint %s\nlog %s\n", res.episodes_done,
                res.episodes_total, res.finished ? "" : " (incomplete)", res.checkpoint_path,
                res.log_path);
    return 0;
  }
  if (*eval) {
    rigl_eval_options opts{checkpoint.empty() ? nullptr : checkpoint.c_str(), oracle ? 1 : 0};
    rigl_eval_report rep{};
    if (int rc = report(rigl_eval(cfg.get(), &opts, &rep))) return rc;
    std::printf(
        "prec_cat %.6f\nrec_cat %.6f\navg_sim %.6f\navg_dist_km %.6f\naccuracy %.6f\n"
        "predictions %zu skipped_users %zu\n",
        rep.prec_cat, rep.rec_cat, rep.avg_sim, rep.avg_dist_km, rep.accuracy, rep.predictions,
        rep.skipped_users);
    return 0;
  }
  if (*sweep) {
    std::vector<const char*> ptrs;
    for (const auto& a : axes) ptrs.push_back(a.c_str());
    rigl_sweep_result res{};
    if (int rc = report(rigl_sweep(cfg.get(), ptrs.data(), ptrs.size(), &res))) return rc;
    std::printf("points %zu rows %zu\ntable %s\n", res.points, res.rows, res.table_path);
    return 0;
  }
  return 1;
}
