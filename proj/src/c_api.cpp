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

#include "rigl/rigl.h"

#include <cstring>
#include <filesystem>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "rigl/pipeline.hpp"

struct rigl_config {
  rigl::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;
// Backing storage for strings handed out in result structs.
thread_local std::string g_path_a;
thread_local std::string g_path_b;

rigl_status status_of(rigl::ErrorKind kind) {
  switch (kind) {
    case rigl::ErrorKind::kInvalidArgument:
      return RIGL_ERR_INVALID_ARGUMENT;
    case rigl::ErrorKind::kIo:
      return RIGL_ERR_IO;
    case rigl::ErrorKind::kConfig:
      return RIGL_ERR_CONFIG;
    case rigl::ErrorKind::kLookup:
      return RIGL_ERR_LOOKUP;
    case rigl::ErrorKind::kNumeric:
      return RIGL_ERR_NUMERIC;
    case rigl::ErrorKind::kState:
      return RIGL_ERR_STATE;
  }
  return RIGL_ERR_INTERNAL;
}

template <typename F>
rigl_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return RIGL_OK;
  } catch (const rigl::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RIGL_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return RIGL_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return RIGL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return RIGL_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) rigl::fail(rigl::ErrorKind::kInvalidArgument, what);
}

}  // namespace

extern "C" {

const char* rigl_version(void) { return "1.0.0"; }

const char* rigl_status_string(rigl_status status) {
  switch (status) {
    case RIGL_OK:
      return "ok";
    case RIGL_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case RIGL_ERR_IO:
      return "i/o error";
    case RIGL_ERR_CONFIG:
      return "configuration error";
    case RIGL_ERR_LOOKUP:
      return "lookup error";
    case RIGL_ERR_NUMERIC:
      return "numeric error";
    case RIGL_ERR_STATE:
      return "invalid state";
    case RIGL_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* rigl_last_error(void) { return g_last_error.c_str(); }

void rigl_set_log_quiet(int quiet) { rigl::set_log_quiet(quiet != 0); }

rigl_status rigl_config_load(const char* path, rigl_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must be non-null");
    *out = nullptr;
    auto* h = new rigl_config{rigl::load_config(path)};
    *out = h;
  });
}

rigl_status rigl_config_parse(const char* json, const char* base_dir, rigl_config** out) {
  return guarded([&] {
    require(json != nullptr && out != nullptr, "json and out must be non-null");
    *out = nullptr;
    auto* h = new rigl_config{rigl::parse_config(json, base_dir ? base_dir : ".")};
    *out = h;
  });
}

rigl_status rigl_config_set(rigl_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr,
            "config, key and value must be non-null");
    // Apply to a copy so a rejected override leaves the handle untouched.
    rigl::RunConfig next = config->cfg;
    rigl::set_override(next, key, value);
    config->cfg = std::move(next);
  });
}

rigl_status rigl_config_validate(const rigl_config* config) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    rigl::validate_config(config->cfg);
  });
}

rigl_status rigl_config_fingerprint(const rigl_config* config, char* buf, size_t len) {
  return guarded([&] {
    require(config != nullptr && buf != nullptr, "config and buf must be non-null");
    const std::string fp = rigl::config_fingerprint(config->cfg);
    require(len > fp.size(), "buffer too small for the fingerprint");
    std::memcpy(buf, fp.c_str(), fp.size() + 1);
  });
}

rigl_status rigl_config_dump(const rigl_config* config, char* buf, size_t len, size_t* needed) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    const std::string text = config->cfg.tree.dump(2);
    if (needed != nullptr) *needed = text.size() + 1;
    if (buf == nullptr) return;
    require(len > text.size(), "buffer too small for the config");
    std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

void rigl_config_free(rigl_config* config) { delete config; }

rigl_status rigl_build(const rigl_config* config, rigl_build_info* out) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    const rigl::BuildResult r = rigl::cmd_build(config->cfg);
    if (out == nullptr) return;
    const rigl::BuildArtifacts& b = *r.artifacts;
    g_path_a = r.path;
    *out = rigl_build_info{r.cache_hit ? 1 : 0,     g_path_a.c_str(),       b.checkins.size(),
                           b.users.size(),          b.kg.num_pois(),        b.kg.num_categories(),
                           b.kg.num_zones(),        b.contexts.size()};
  });
}

rigl_status rigl_calibrate(const rigl_config* config, rigl_calibration* out) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    const rigl::CalibrationReport r = rigl::cmd_calibrate(config->cfg);
    if (out != nullptr) {
      *out = rigl_calibration{r.baselines.d, r.baselines.c, r.baselines.p, r.samples, r.rounds};
    }
  });
}

rigl_status rigl_train(const rigl_config* config, const rigl_train_options* options,
                       rigl_train_result* out) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    rigl::TrainRequest req;
    if (options != nullptr) {
      if (options->resume_path != nullptr) req.resume_path = options->resume_path;
      if (options->stop_after >= 0) req.stop_after = static_cast<std::size_t>(options->stop_after);
    }
    const rigl::TrainOutcome r = rigl::cmd_train(config->cfg, req);
    if (out == nullptr) return;
    g_path_a = r.checkpoint_path;
    g_path_b = r.log_path;
    *out = rigl_train_result{g_path_a.c_str(), g_path_b.c_str(), r.episodes_done,
                             r.episodes_total, r.finished ? 1 : 0};
  });
}

rigl_status rigl_eval(const rigl_config* config, const rigl_eval_options* options,
                      rigl_eval_report* out) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    rigl::EvalRequest req;
    if (options != nullptr) {
      if (options->checkpoint_path != nullptr) req.checkpoint_path = options->checkpoint_path;
      req.oracle = options->oracle != 0;
    }
    const rigl::EvalReport r = rigl::cmd_eval(config->cfg, req);
    if (out == nullptr) return;
    g_path_a = r.fingerprint;
    *out = rigl_eval_report{r.prec_cat,       r.rec_cat,          r.avg_sim,
                            r.avg_dist_km,    r.accuracy,         r.predictions,
                            r.skipped_users,  r.skipped_events,   g_path_a.c_str()};
  });
}

rigl_status rigl_sweep(const rigl_config* config, const char* const* axes, size_t num_axes,
                       rigl_sweep_result* out) {
  return guarded([&] {
    require(config != nullptr, "config must be non-null");
    require(axes != nullptr || num_axes == 0, "axes must be non-null");
    std::vector<rigl::SweepAxis> parsed;
    for (size_t i = 0; i < num_axes; ++i) {
      require(axes[i] != nullptr, "axis strings must be non-null");
      parsed.push_back(rigl::parse_axis(axes[i]));
    }
    const rigl::SweepOutcome r = rigl::cmd_sweep(config->cfg, parsed);
    if (out == nullptr) return;
    g_path_a = r.table_path;
    *out = rigl_sweep_result{g_path_a.c_str(), r.points, r.rows};
  });
}

}  // extern "C"
