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

#include "finecap/statics.hpp"

#include "finecap/errors.hpp"
#include "finecap/text.hpp"
#include "json.hpp"

namespace finecap {

namespace {

const std::vector<std::string> kLabels = {"FG",   "FOREGROUND", "BG", "BACKGROUND",
                                          "FULL", "FULL DESCRIPTION"};

std::string first_of(const std::map<std::string, std::string>& sections,
                     std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (auto it = sections.find(k); it != sections.end()) return it->second;
  }
  return {};
}

std::string format_time(double t) { return nlohmann::json(t).dump(); }

}  // namespace

FrameDescription parse_frame_description(std::string_view response) {
  const auto sections = parse_labeled_sections(response, kLabels);
  FrameDescription d;
  d.foreground = first_of(sections, {"FG", "FOREGROUND"});
  d.background = first_of(sections, {"BG", "BACKGROUND"});
  d.full = first_of(sections, {"FULL", "FULL DESCRIPTION"});
  if (d.foreground.empty()) throw ParseError("frame description is missing the FG section");
  if (d.background.empty()) throw ParseError("frame description is missing the BG section");
  if (d.full.empty()) throw ParseError("frame description is missing the FULL section");
  return d;
}

FrameDescription describe_keyframe(const ModelContext& ctx, const FrameRef& frame,
                                   const std::string& q) {
  if (trim(q).empty()) throw InvalidArgument("coarse caption must be non-empty");
  ChatRequest req =
      ctx.request(Role::kImageLmm, ctx.prompts.render("describe_keyframe", {{"q", q}}));
  req.images.push_back(Attachment{frame.timestamp, "image/png", frame.png_bytes()});
  FrameDescription d;
  try {
    d = parse_frame_description(ctx.backends.chat(Role::kImageLmm, req).text);
  } catch (const ParseError&) {
    req.user += ctx.prompts.reprompt_suffix();
    d = parse_frame_description(ctx.backends.chat(Role::kImageLmm, req).text);
  }
  d.timestamp = frame.timestamp;
  return d;
}

CandidateList rewrite_statics(const ModelContext& ctx,
                              std::span<const FrameDescription> descriptions,
                              const std::string& q, std::size_t n) {
  if (descriptions.empty()) throw InvalidArgument("rewrite_statics needs at least one description");
  if (n < 1) throw InvalidArgument("N_s must be >= 1");
  std::string joined;
  for (const auto& d : descriptions) {
    joined += "[frame at " + format_time(d.timestamp) + "s] FG: " + d.foreground +
              " | BG: " + d.background + " | FULL: " + d.full + "\n";
  }
  return ask_for_list(ctx, Role::kLlm, "rewrite_statics",
                      {{"q", q}, {"descriptions", joined}, {"n", std::to_string(n)}}, n);
}

StaticsResult caption_statics(const ModelContext& ctx, const std::string& q,
                              std::span<const FrameRef> keyframes, std::size_t n) {
  StaticsResult out;
  for (const auto& f : keyframes) out.descriptions.push_back(describe_keyframe(ctx, f, q));
  out.candidates = rewrite_statics(ctx, out.descriptions, q, n);
  return out;
}

}  // namespace finecap
