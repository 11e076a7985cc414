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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "finecap/backends.hpp"
#include "finecap/evaluator.hpp"
#include "finecap/frames.hpp"
#include "finecap/keyframe.hpp"
#include "finecap/perturb.hpp"
#include "json.hpp"

namespace finecap {

struct DatasetPreset {
  std::string name;
  std::size_t max_segments = 1;
  std::string frame_policy;
};

// Known presets: charades, didemo, activitynet.
std::optional<DatasetPreset> find_preset(std::string_view name);

struct Config {
  std::string dataset_preset = "charades";
  FramePolicy frame_policy;  // dynamics frame sampling
  SegmentationConfig segmentation;

  std::size_t n_statics = 3;
  std::size_t n_dynamics = 3;
  std::size_t n_questions = 5;
  PerturbConfig perturb;

  TrainerConfig trainer;
  std::optional<double> filter_threshold;

  BackendConfig llm;
  BackendConfig image_lmm;
  BackendConfig video_lmm;
  BackendConfig embedder;
  std::size_t embedder_dim = 0;  // 0: taken from the first response
  std::string frame_embedder_kind = "auto";  // auto | mock | precomputed
  std::filesystem::path frame_embedder_path;

  bool use_mock = false;
  std::filesystem::path mock_rules;  // empty: built-in rules
  std::size_t mock_embed_dim = 64;

  std::filesystem::path prompt_templates;  // empty: built-in templates
  std::uint64_t seed = 0;
  std::size_t workers = 4;
  std::map<std::string, std::size_t> stage_workers;
  std::filesystem::path cache_dir;
  std::filesystem::path frames_dir = "frames";
  std::filesystem::path decoder;

  // The fully populated document this config was built from.
  nlohmann::json normalized;

  std::size_t workers_for(const std::string& stage) const;
};

// Built-in defaults as a JSON document.
nlohmann::json default_config_json();

// Fills defaults, applies the dataset preset, and validates. Unknown keys
// and wrong types raise ConfigError naming the key path. Relative paths are
// resolved against `base_dir`.
Config parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
// Empty or whitespace-only files are an empty object.
Config load_config(const std::filesystem::path& path);

// Applies a "dotted.key=value" override; value is parsed as JSON when
// possible, otherwise taken as a string.
void set_config_value(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

// Digest of the normalized config without the worker counts, which do not
// change outputs.
std::string config_digest(const Config& cfg);

}  // namespace finecap
