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

#include "finecap/model_context.hpp"

#include "finecap/text.hpp"

namespace finecap {

ChatRequest ModelContext::request(Role role, std::string user) const {
  ChatRequest req;
  req.system = prompts.system();
  req.user = std::move(user);
  req.seed = seed;
  switch (role) {
    case Role::kLlm: req.temperature = llm_temperature; break;
    case Role::kImageLmm: req.temperature = image_lmm_temperature; break;
    case Role::kVideoLmm: req.temperature = video_lmm_temperature; break;
  }
  return req;
}

CandidateList ask_for_list(const ModelContext& ctx, Role role, const std::string& stage,
                           const std::map<std::string, std::string>& vars, std::size_t n,
                           std::vector<Attachment> images) {
  ChatRequest req = ctx.request(role, ctx.prompts.render(stage, vars));
  req.images = std::move(images);
  CandidateList out;
  out.items = parse_numbered_list(ctx.backends.chat(role, req).text);
  if (out.items.size() < n) {
    req.user += ctx.prompts.reprompt_suffix();
    auto retry = parse_numbered_list(ctx.backends.chat(role, req).text);
    if (retry.size() > out.items.size()) out.items = std::move(retry);
  }
  if (out.items.size() > n) out.items.resize(n);
  out.undercount = out.items.size() < n;
  return out;
}

}  // namespace finecap
