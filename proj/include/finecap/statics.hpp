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

#include <span>
#include <string>
#include <vector>

#include "finecap/frames.hpp"
#include "finecap/model_context.hpp"

namespace finecap {

struct FrameDescription {
  std::string foreground;
  std::string background;
  std::string full;
  double timestamp = 0.0;

  friend bool operator==(const FrameDescription&, const FrameDescription&) = default;
};

// Parses "FG: ..|BG: ..|FULL: .." (newline or '|' separated). Throws
// ParseError naming the first missing section.
FrameDescription parse_frame_description(std::string_view response);

// One image-LMM call with the key frame and q as guidance; one re-prompt on
// an unparseable answer.
FrameDescription describe_keyframe(const ModelContext& ctx, const FrameRef& frame,
                                   const std::string& q);

// One LLM call over every frame description plus q, parsed into at most n
// static caption candidates.
CandidateList rewrite_statics(const ModelContext& ctx,
                              std::span<const FrameDescription> descriptions,
                              const std::string& q, std::size_t n);

struct StaticsResult {
  std::vector<FrameDescription> descriptions;
  CandidateList candidates;
};

// Key frames are described sequentially, then rewritten once.
StaticsResult caption_statics(const ModelContext& ctx, const std::string& q,
                              std::span<const FrameRef> keyframes, std::size_t n);

}  // namespace finecap
