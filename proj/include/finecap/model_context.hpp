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

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "finecap/backends.hpp"
#include "finecap/prompts.hpp"

namespace finecap {

// Everything a generation stage needs to talk to models.
struct ModelContext {
  BackendSet backends;
  PromptTemplates prompts = PromptTemplates::builtin();
  double llm_temperature = 0.7;
  double image_lmm_temperature = 0.7;
  double video_lmm_temperature = 0.7;
  std::uint64_t seed = 0;

  ChatRequest request(Role role, std::string user) const;
};

// Parsed list output of a generation call.
struct CandidateList {
  std::vector<std::string> items;
  bool undercount = false;  // fewer than requested even after one re-prompt
};

// Renders `stage`, asks `role`, and parses a numbered list of `n` items. On
// under-count the prompt is re-issued once with the stricter-format suffix;
// the longer of the two answers is kept. Extra items are truncated.
CandidateList ask_for_list(const ModelContext& ctx, Role role, const std::string& stage,
                           const std::map<std::string, std::string>& vars, std::size_t n,
                           std::vector<Attachment> images = {});

}  // namespace finecap
