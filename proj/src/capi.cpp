// Copyright 2026 The finecap Authors.
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

#include "finecap/finecap.h"

#include <cstring>
#include <fstream>
#include <string>

#include "finecap/analytics.hpp"
#include "finecap/config.hpp"
#include "finecap/errors.hpp"
#include "finecap/evaluator.hpp"
#include "finecap/frames.hpp"
#include "finecap/io.hpp"
#include "finecap/pipeline.hpp"
#include "finecap/text.hpp"

struct fc_context {
  nlohmann::json doc = nlohmann::json::object();
  std::filesystem::path base_dir;
  finecap::Config cfg;
  finecap::RunOptions opts;
  std::optional<finecap::LogLevel> log_level = finecap::LogLevel::kInfo;
  std::string last_error;
  std::size_t last_failures = 0;
  bool last_manifest_match = false;
};

struct fc_model {
  finecap::EvaluatorModel model;
};

namespace {

thread_local std::string g_last_error;

fc_status status_for(finecap::ErrorCode code) {
  using finecap::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig: return FC_ERR_CONFIG;
    case ErrorCode::kIo:
    case ErrorCode::kDataset:
    case ErrorCode::kParse: return FC_ERR_IO;
    case ErrorCode::kInvalidArgument: return FC_ERR_INVALID_ARGUMENT;
    case ErrorCode::kBackend: return FC_ERR_BACKEND;
    case ErrorCode::kNumeric: return FC_ERR_NUMERIC;
  }
  return FC_ERR_INTERNAL;
}

// Runs fn, translating exceptions into a status and an error message.
template <typename Fn>
fc_status guarded(std::string& err, Fn&& fn) {
  try {
    return fn();
  } catch (const finecap::Error& e) {
    err = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    err = e.what();
    return FC_ERR_INTERNAL;
  } catch (...) {
    err = "unknown error";
    return FC_ERR_INTERNAL;
  }
}

fc_status null_arg(std::string& err, const char* what) {
  err = std::string(what) + " must not be NULL";
  return FC_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* fc_version(void) { return FC_VERSION; }

const char* fc_status_name(fc_status status) {
  switch (status) {
    case FC_OK: return "ok";
    case FC_PARTIAL: return "partial";
    case FC_ERR_CONFIG: return "config error";
    case FC_ERR_IO: return "io error";
    case FC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FC_ERR_BACKEND: return "backend error";
    case FC_ERR_NUMERIC: return "numeric error";
    case FC_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

int fc_exit_code(fc_status status) {
  if (status == FC_OK) return 0;
  if (status == FC_PARTIAL) return 1;
  return 2;
}

fc_status fc_context_create(const char* config_path, fc_context** out) {
  if (!out) return null_arg(g_last_error, "out");
  *out = nullptr;
  return guarded(g_last_error, [&] {
    auto ctx = std::make_unique<fc_context>();
    if (config_path) {
      const std::filesystem::path p(config_path);
      const std::string text = finecap::read_file(p);
      if (!finecap::trim(text).empty()) {
        try {
          ctx->doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
          throw finecap::ConfigError("<root>", p.string() + ": " + e.what());
        }
      }
      ctx->base_dir = p.parent_path();
    }
    ctx->cfg = finecap::parse_config(ctx->doc, ctx->base_dir);
    *out = ctx.release();
    return FC_OK;
  });
}

void fc_context_destroy(fc_context* ctx) { delete ctx; }

const char* fc_last_error(const fc_context* ctx) {
  return ctx ? ctx->last_error.c_str() : g_last_error.c_str();
}

fc_status fc_context_set_option(fc_context* ctx, const char* key, const char* value) {
  if (!ctx) return null_arg(g_last_error, "ctx");
  if (!key || !value) return null_arg(ctx->last_error, "key and value");
  return guarded(ctx->last_error, [&] {
    const std::string k(key), v(value);
    auto& o = ctx->opts;
    if (k.rfind("config.", 0) == 0) {
      nlohmann::json doc = ctx->doc;
      finecap::set_config_value(doc, k.substr(7), v);
      ctx->cfg = finecap::parse_config(doc, ctx->base_dir);
      ctx->doc = std::move(doc);
    } else if (k == "work_dir") {
      o.work_dir = v;
    } else if (k == "moments") {
      o.moments = v;
    } else if (k == "stats_input") {
      o.stats_input = v;
    } else if (k == "lexicon") {
      o.lexicon = v;
    } else if (k == "predictions") {
      o.predictions = v;
    } else if (k == "ground_truth") {
      o.ground_truth = v;
    } else if (k == "force") {
      if (v != "0" && v != "1") throw finecap::InvalidArgument("force must be 0 or 1");
      o.force = v == "1";
    } else if (k == "log_level") {
      if (v == "debug") ctx->log_level = finecap::LogLevel::kDebug;
      else if (v == "info") ctx->log_level = finecap::LogLevel::kInfo;
      else if (v == "warn") ctx->log_level = finecap::LogLevel::kWarn;
      else if (v == "error") ctx->log_level = finecap::LogLevel::kError;
      else if (v == "off") ctx->log_level.reset();
      else throw finecap::InvalidArgument("log_level must be debug, info, warn, error or off");
    } else {
      throw finecap::InvalidArgument("unknown option '" + k + "'");
    }
    return FC_OK;
  });
}

fc_status fc_run_stage(fc_context* ctx, const char* stage) {
  if (!ctx) return null_arg(g_last_error, "ctx");
  if (!stage) return null_arg(ctx->last_error, "stage");
  ctx->last_failures = 0;
  ctx->last_manifest_match = false;
  return guarded(ctx->last_error, [&] {
    const std::string name(stage);
    const bool all = name == "run-all";
    const auto parsed = finecap::parse_stage(name);
    if (!all && !parsed) throw finecap::InvalidArgument("unknown stage '" + name + "'");
    finecap::Logger logger = ctx->log_level ? finecap::Logger::to_stderr(*ctx->log_level) : finecap::Logger();
    finecap::Pipeline pipeline(ctx->cfg, ctx->opts, logger);
    const auto rep = all ? pipeline.run_all() : pipeline.run(*parsed);
    ctx->last_failures = rep.failures.size();
    ctx->last_manifest_match = rep.manifest_match;
    if (rep.exit_code == finecap::kExitOk) return FC_OK;
    if (rep.exit_code == finecap::kExitPartial) {
      ctx->last_error = std::to_string(rep.failures.size()) + " moment(s) failed";
      return FC_PARTIAL;
    }
    ctx->last_error = std::string(finecap::to_string(rep.stage)) + ": " + rep.error;
    return rep.error_code ? status_for(*rep.error_code) : FC_ERR_INTERNAL;
  });
}

size_t fc_last_failure_count(const fc_context* ctx) { return ctx ? ctx->last_failures : 0; }

int fc_last_manifest_match(const fc_context* ctx) { return ctx && ctx->last_manifest_match ? 1 : 0; }

fc_status fc_normalized_config_json(fc_context* ctx, char* buf, size_t cap, size_t* needed) {
  if (!ctx) return null_arg(g_last_error, "ctx");
  const std::string text = ctx->cfg.normalized.dump(2);
  if (needed) *needed = text.size() + 1;
  if (!buf || cap < text.size() + 1) {
    ctx->last_error = "buffer too small";
    return FC_ERR_INVALID_ARGUMENT;
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return FC_OK;
}

fc_status fc_extract_frames(fc_context* ctx, const char* video_path, const char* video_id,
                            double fps, size_t* count) {
  if (!ctx) return null_arg(g_last_error, "ctx");
  if (!video_path || !video_id) return null_arg(ctx->last_error, "video_path and video_id");
  return guarded(ctx->last_error, [&] {
    if (ctx->cfg.decoder.empty()) throw finecap::ConfigError("decoder", "required for frame extraction");
    const std::size_t n =
        finecap::extract_frames(ctx->cfg.decoder, video_path, ctx->cfg.frames_dir, video_id, fps);
    if (count) *count = n;
    return FC_OK;
  });
}

fc_status fc_t_iou(double a_start, double a_end, double b_start, double b_end, double* out) {
  if (!out) return null_arg(g_last_error, "out");
  return guarded(g_last_error, [&] {
    *out = finecap::t_iou({a_start, a_end}, {b_start, b_end});
    return FC_OK;
  });
}

fc_status fc_recall_at(const char* predictions_path, const char* ground_truth_path, const char* task,
                       double m, int k, double* out) {
  if (!predictions_path || !ground_truth_path || !task || !out) {
    return null_arg(g_last_error, "paths, task and out");
  }
  return guarded(g_last_error, [&] {
    const auto t = finecap::parse_retrieval_task(task);
    if (!t) throw finecap::InvalidArgument(std::string("unknown task '") + task + "'");
    const auto preds = finecap::load_predictions(predictions_path);
    const auto gt = finecap::load_ground_truth(ground_truth_path);
    *out = finecap::recall_at(preds, gt, *t, m, k);
    return FC_OK;
  });
}

fc_status fc_model_load(const char* checkpoint_path, fc_model** out) {
  if (!checkpoint_path || !out) return null_arg(g_last_error, "checkpoint_path and out");
  *out = nullptr;
  return guarded(g_last_error, [&] {
    *out = new fc_model{finecap::load_checkpoint(checkpoint_path)};
    return FC_OK;
  });
}

void fc_model_destroy(fc_model* model) { delete model; }

fc_status fc_model_dims(const fc_model* model, size_t* base_dim, size_t* proj_dim) {
  if (!model) return null_arg(g_last_error, "model");
  if (base_dim) *base_dim = model->model.base_dim();
  if (proj_dim) *proj_dim = model->model.proj_dim();
  return FC_OK;
}

fc_status fc_model_score(const fc_model* model, const double* frames, size_t n_frames,
                         const double* caption, size_t dim, double* out) {
  if (!model || !frames || !caption || !out) return null_arg(g_last_error, "model, frames, caption and out");
  return guarded(g_last_error, [&] {
    std::vector<finecap::EmbeddingVector> fv;
    for (size_t i = 0; i < n_frames; ++i) fv.emplace_back(frames + i * dim, frames + (i + 1) * dim);
    *out = finecap::score(model->model, fv, std::span<const double>(caption, dim));
    return FC_OK;
  });
}

}  // extern "C"
