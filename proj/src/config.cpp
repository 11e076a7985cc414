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

#include "finecap/config.hpp"

#include <array>
#include <cmath>
#include <set>

#include "finecap/digest.hpp"
#include "finecap/errors.hpp"
#include "finecap/io.hpp"
#include "finecap/text.hpp"

namespace finecap {

namespace {

using nlohmann::json;

const std::array<DatasetPreset, 3> kPresets = {{
    {"charades", 1, "fps:8"},
    {"didemo", 1, "fps:8"},
    {"activitynet", 5, "uniform:64"},
}};

const std::set<std::string> kStageNames = {
    "keyframes", "caption-statics", "caption-dynamics", "perturb", "embed",
    "train-evaluator", "score", "select", "stats", "eval-metrics"};

enum class Kind { kUInt, kReal, kBool, kString };

// Keys whose default is null and what they accept besides null.
const std::map<std::string, Kind> kNullable = {
    {"dataset.max_segments", Kind::kUInt},
    {"dataset.frame_policy", Kind::kString},
    {"evaluator.threshold", Kind::kReal},
};

json backend_defaults() {
  return {{"endpoint", ""},       {"model", ""},        {"token_env", ""},
          {"timeout_s", 60.0},    {"max_retries", 3u},  {"temperature", 0.7},
          {"backoff_initial_s", 1.0}};
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kUInt: return "a non-negative integer";
    case Kind::kReal: return "a number";
    case Kind::kBool: return "a boolean";
    case Kind::kString: return "a string";
  }
  return "?";
}

bool matches(const json& v, Kind k) {
  switch (k) {
    case Kind::kUInt: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::kReal: return v.is_number();
    case Kind::kBool: return v.is_boolean();
    case Kind::kString: return v.is_string();
  }
  return false;
}

Kind kind_of(const json& def) {
  if (def.is_boolean()) return Kind::kBool;
  if (def.is_string()) return Kind::kString;
  if (def.is_number_float()) return Kind::kReal;
  return Kind::kUInt;
}

void merge(json& target, const json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  }
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = join_path(prefix, it.key());
    if (path == "stage_workers") {
      if (!it.value().is_object()) throw ConfigError(path, "expected an object");
      for (auto s = it.value().begin(); s != it.value().end(); ++s) {
        const std::string sp = join_path(path, s.key());
        if (!kStageNames.count(s.key())) throw ConfigError(sp, "unknown stage");
        if (!matches(s.value(), Kind::kUInt)) throw ConfigError(sp, "expected a non-negative integer");
        target[it.key()][s.key()] = s.value();
      }
      continue;
    }
    if (!target.contains(it.key())) throw ConfigError(path, "unknown key");
    json& def = target[it.key()];
    const json& val = it.value();
    if (def.is_object()) {
      merge(def, val, path);
      continue;
    }
    if (auto n = kNullable.find(path); n != kNullable.end()) {
      if (!val.is_null() && !matches(val, n->second)) {
        throw ConfigError(path, std::string("expected null or ") + kind_name(n->second));
      }
      def = val;
      continue;
    }
    const Kind k = kind_of(def);
    if (!matches(val, k)) throw ConfigError(path, std::string("expected ") + kind_name(k));
    def = k == Kind::kReal ? json(val.get<double>()) : val;
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

std::size_t positive_uint(const json& doc, const json::json_pointer& ptr, const std::string& key) {
  const auto v = doc.at(ptr).get<std::size_t>();
  if (v < 1) throw ConfigError(key, "must be >= 1");
  return v;
}

double real_at(const json& doc, const std::string& dotted) {
  std::string ptr = "/" + dotted;
  for (auto& c : ptr) if (c == '.') c = '/';
  return doc.at(json::json_pointer(ptr)).get<double>();
}

json::json_pointer ptr_of(const std::string& dotted) {
  std::string ptr = "/" + dotted;
  for (auto& c : ptr) if (c == '.') c = '/';
  return json::json_pointer(ptr);
}

BackendConfig backend_from(const json& j, const std::string& key, const std::filesystem::path& cache) {
  BackendConfig b;
  b.endpoint = j.at("endpoint").get<std::string>();
  b.model = j.at("model").get<std::string>();
  b.token_env = j.at("token_env").get<std::string>();
  b.timeout_s = j.at("timeout_s").get<double>();
  b.max_retries = static_cast<int>(j.at("max_retries").get<std::size_t>());
  b.temperature = j.at("temperature").get<double>();
  b.backoff_initial_s = j.at("backoff_initial_s").get<double>();
  b.cache_dir = cache;
  if (!(b.timeout_s > 0.0)) throw ConfigError(key + ".timeout_s", "must be > 0");
  if (!(b.temperature >= 0.0)) throw ConfigError(key + ".temperature", "must be >= 0");
  if (!(b.backoff_initial_s >= 0.0)) throw ConfigError(key + ".backoff_initial_s", "must be >= 0");
  return b;
}

}  // namespace

std::optional<DatasetPreset> find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::size_t Config::workers_for(const std::string& stage) const {
  auto it = stage_workers.find(stage);
  return it == stage_workers.end() || it->second == 0 ? workers : it->second;
}

json default_config_json() {
  json embedder = backend_defaults();
  embedder["dim"] = 0u;
  return {
      {"dataset", {{"preset", "charades"}, {"max_segments", nullptr}, {"frame_policy", nullptr}}},
      {"captioning", {{"n_statics", 3u}, {"n_dynamics", 3u}, {"n_questions", 5u}}},
      {"keyframe",
       {{"initial_threshold", 27.0},
        {"threshold_min", 1.0},
        {"threshold_max", 100.0},
        {"max_iterations", 20u},
        {"analysis_fps", 2.0}}},
      {"perturb", {{"n_pos", 3u}, {"n_neg", 3u}, {"single_call", false}}},
      {"evaluator",
       {{"temperature", 0.07},
        {"lambda_contrastive", 1.0},
        {"lambda_matching", 1.0},
        {"batch_size", 16u},
        {"learning_rate", 0.01},
        {"epochs", 10u},
        {"pool_frames", 20u},
        {"proj_dim", 0u},
        {"threshold", nullptr}}},
      {"backends",
       {{"llm", backend_defaults()},
        {"image_lmm", backend_defaults()},
        {"video_lmm", backend_defaults()},
        {"embedder", embedder},
        {"frame_embedder", {{"kind", "auto"}, {"path", ""}}}}},
      {"mock", {{"enabled", false}, {"rules", ""}, {"embed_dim", 64u}}},
      {"prompt_templates", ""},
      {"seed", 0u},
      {"workers", 4u},
      {"stage_workers", json::object()},
      {"cache_dir", ""},
      {"frames_dir", "frames"},
      {"decoder", ""},
  };
}

Config parse_config(const json& doc, const std::filesystem::path& base_dir) {
  json n = default_config_json();
  merge(n, doc.is_null() ? json::object() : doc, "");

  Config c;
  // Dataset preset fills L and the frame policy unless given explicitly.
  c.dataset_preset = n["dataset"]["preset"].get<std::string>();
  const auto preset = find_preset(c.dataset_preset);
  if (!preset && c.dataset_preset != "custom") {
    throw ConfigError("dataset.preset", "unknown preset '" + c.dataset_preset +
                                            "' (charades, didemo, activitynet, custom)");
  }
  auto& ds = n["dataset"];
  if (ds["max_segments"].is_null()) {
    if (!preset) throw ConfigError("dataset.max_segments", "required with the custom preset");
    ds["max_segments"] = preset->max_segments;
  }
  if (ds["frame_policy"].is_null()) {
    if (!preset) throw ConfigError("dataset.frame_policy", "required with the custom preset");
    ds["frame_policy"] = preset->frame_policy;
  }
  try {
    c.frame_policy = FramePolicy::parse(ds["frame_policy"].get<std::string>());
  } catch (const Error& e) {
    throw ConfigError("dataset.frame_policy", e.what());
  }

  auto& seg = c.segmentation;
  seg.max_segments = positive_uint(n, ptr_of("dataset.max_segments"), "dataset.max_segments");
  seg.initial_threshold = real_at(n, "keyframe.initial_threshold");
  seg.threshold_min = real_at(n, "keyframe.threshold_min");
  seg.threshold_max = real_at(n, "keyframe.threshold_max");
  seg.max_iterations = static_cast<int>(n["keyframe"]["max_iterations"].get<std::size_t>());
  seg.analysis_fps = real_at(n, "keyframe.analysis_fps");
  if (!(seg.threshold_min > 0.0)) throw ConfigError("keyframe.threshold_min", "must be > 0");
  if (!(seg.threshold_max > seg.threshold_min)) {
    throw ConfigError("keyframe.threshold_max", "must exceed keyframe.threshold_min");
  }
  if (!(seg.initial_threshold >= seg.threshold_min && seg.initial_threshold <= seg.threshold_max)) {
    throw ConfigError("keyframe.initial_threshold", "must lie within [threshold_min, threshold_max]");
  }
  if (seg.max_iterations < 1) throw ConfigError("keyframe.max_iterations", "must be >= 1");
  if (!(seg.analysis_fps > 0.0)) throw ConfigError("keyframe.analysis_fps", "must be > 0");

  c.n_statics = positive_uint(n, ptr_of("captioning.n_statics"), "captioning.n_statics");
  c.n_dynamics = positive_uint(n, ptr_of("captioning.n_dynamics"), "captioning.n_dynamics");
  c.n_questions = positive_uint(n, ptr_of("captioning.n_questions"), "captioning.n_questions");
  c.perturb.n_pos = positive_uint(n, ptr_of("perturb.n_pos"), "perturb.n_pos");
  c.perturb.n_neg = positive_uint(n, ptr_of("perturb.n_neg"), "perturb.n_neg");
  c.perturb.single_call = n["perturb"]["single_call"].get<bool>();

  auto& t = c.trainer;
  t.temperature = real_at(n, "evaluator.temperature");
  t.lambda_contrastive = real_at(n, "evaluator.lambda_contrastive");
  t.lambda_matching = real_at(n, "evaluator.lambda_matching");
  t.batch_size = positive_uint(n, ptr_of("evaluator.batch_size"), "evaluator.batch_size");
  t.learning_rate = real_at(n, "evaluator.learning_rate");
  t.epochs = positive_uint(n, ptr_of("evaluator.epochs"), "evaluator.epochs");
  t.pool_frames = positive_uint(n, ptr_of("evaluator.pool_frames"), "evaluator.pool_frames");
  t.proj_dim = n["evaluator"]["proj_dim"].get<std::size_t>();
  if (!(t.temperature > 0.0) || !std::isfinite(t.temperature)) {
    throw ConfigError("evaluator.temperature", "must be > 0");
  }
  if (!(t.lambda_contrastive >= 0.0)) throw ConfigError("evaluator.lambda_contrastive", "must be >= 0");
  if (!(t.lambda_matching >= 0.0)) throw ConfigError("evaluator.lambda_matching", "must be >= 0");
  if (!(t.learning_rate > 0.0)) throw ConfigError("evaluator.learning_rate", "must be > 0");
  if (const auto& th = n["evaluator"]["threshold"]; !th.is_null()) {
    const double v = th.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("evaluator.threshold", "must lie in [0, 1]");
    c.filter_threshold = v;
  }

  c.seed = n["seed"].get<std::uint64_t>();
  t.seed = c.seed;
  c.workers = positive_uint(n, ptr_of("workers"), "workers");
  for (auto it = n["stage_workers"].begin(); it != n["stage_workers"].end(); ++it) {
    c.stage_workers[it.key()] = it.value().get<std::size_t>();
  }
  c.perturb.workers = c.workers_for("perturb");
  c.cache_dir = resolve(n["cache_dir"].get<std::string>(), base_dir);
  c.frames_dir = resolve(n["frames_dir"].get<std::string>(), base_dir);
  c.decoder = resolve(n["decoder"].get<std::string>(), base_dir);
  c.prompt_templates = resolve(n["prompt_templates"].get<std::string>(), base_dir);

  const auto& be = n["backends"];
  c.llm = backend_from(be["llm"], "backends.llm", c.cache_dir);
  c.image_lmm = backend_from(be["image_lmm"], "backends.image_lmm", c.cache_dir);
  c.video_lmm = backend_from(be["video_lmm"], "backends.video_lmm", c.cache_dir);
  c.embedder = backend_from(be["embedder"], "backends.embedder", c.cache_dir);
  c.embedder_dim = be["embedder"]["dim"].get<std::size_t>();
  c.frame_embedder_kind = be["frame_embedder"]["kind"].get<std::string>();
  if (c.frame_embedder_kind != "auto" && c.frame_embedder_kind != "mock" &&
      c.frame_embedder_kind != "precomputed") {
    throw ConfigError("backends.frame_embedder.kind", "expected auto, mock or precomputed");
  }
  c.frame_embedder_path = resolve(be["frame_embedder"]["path"].get<std::string>(), base_dir);

  c.use_mock = n["mock"]["enabled"].get<bool>();
  c.mock_rules = resolve(n["mock"]["rules"].get<std::string>(), base_dir);
  c.mock_embed_dim = positive_uint(n, ptr_of("mock.embed_dim"), "mock.embed_dim");

  c.normalized = std::move(n);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc = json::object();
  if (!trim(text).empty()) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<root>", path.string() + ": " + e.what());
    }
  }
  return parse_config(doc, path.parent_path());
}

void set_config_value(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("<root>", "empty key");
  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = dotted_key.find('.', pos);
    const std::string part = dotted_key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError(dotted_key, "malformed key");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

std::string config_digest(const Config& cfg) {
  json copy = cfg.normalized;
  copy.erase("workers");
  copy.erase("stage_workers");
  return sha256_hex(copy.dump());
}

}  // namespace finecap
