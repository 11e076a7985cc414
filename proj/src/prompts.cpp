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

#include "finecap/prompts.hpp"

#include "finecap/errors.hpp"
#include "finecap/io.hpp"
#include "finecap/resources.hpp"
#include "finecap/text.hpp"
#include "json.hpp"

namespace finecap {

namespace {

constexpr std::string_view kRequiredStages[] = {
    "describe_keyframe", "rewrite_statics", "generate_questions",
    "answer_and_describe", "rewrite_dynamics", "disturb_positive",
    "disturb_static", "disturb_dynamic", "disturb_all"};

}  // namespace

PromptTemplates PromptTemplates::builtin() { return parse(resources::prompts_json()); }

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

PromptTemplates PromptTemplates::parse(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("prompt_templates", e.what());
  }
  if (!j.is_object()) throw ConfigError("prompt_templates", "expected object");
  PromptTemplates t;
  for (const auto& [key, value] : j.items()) {
    if (key == "version") {
      if (!value.is_number_integer()) throw ConfigError("prompt_templates.version", "expected integer");
      t.version_ = value.get<int>();
      continue;
    }
    if (!value.is_string()) throw ConfigError("prompt_templates." + key, "expected string");
    if (key == "system") {
      t.system_ = value.get<std::string>();
    } else if (key == "reprompt_suffix") {
      t.reprompt_suffix_ = value.get<std::string>();
    } else {
      t.stages_.emplace(key, value.get<std::string>());
    }
  }
  for (auto stage : kRequiredStages) {
    if (!t.stages_.contains(stage)) {
      throw ConfigError("prompt_templates." + std::string(stage), "missing template");
    }
  }
  return t;
}

std::string PromptTemplates::render(std::string_view stage,
                                    const std::map<std::string, std::string>& vars) const {
  auto it = stages_.find(stage);
  if (it == stages_.end()) throw InvalidArgument("no prompt template for stage '" + std::string(stage) + "'");
  return render_template(it->second, vars);
}

}  // namespace finecap
