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

#include "finecap/errors.hpp"
#include "finecap/frames.hpp"
#include "finecap/model_context.hpp"

namespace finecap {

struct VqaPair {
  std::string question;
  std::string answer;

  friend bool operator==(const VqaPair&, const VqaPair&) = default;
};

struct DynamicsBundle {
  std::vector<VqaPair> pairs;
  std::string description;
  bool undercount = false;  // fewer questions than N_qa

  friend bool operator==(const DynamicsBundle&, const DynamicsBundle&) = default;
};

// The video LMM declined to answer; the moment continues with statics only.
class RefusalError : public Error {
 public:
  explicit RefusalError(const std::string& what) : Error(ErrorCode::kBackend, what) {}
};

// N_qa dynamics-oriented questions from q alone.
CandidateList generate_questions(const ModelContext& ctx, const std::string& q, std::size_t n);

// Parses "A1: .. A{n}: .. DESCRIPTION: ..". Answers are positional.
DynamicsBundle parse_answers(std::string_view response, std::span<const std::string> questions);

// One video-LMM call with the ordered frames, every question and q.
DynamicsBundle answer_and_describe(const ModelContext& ctx, const FrameSequence& frames,
                                   std::span<const std::string> questions, const std::string& q);

CandidateList rewrite_dynamics(const ModelContext& ctx, const DynamicsBundle& bundle,
                               const std::string& q, std::size_t n);

}  // namespace finecap
