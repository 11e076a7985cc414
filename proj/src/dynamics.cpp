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

#include "finecap/dynamics.hpp"

#include <regex>

#include "finecap/text.hpp"
#include "json.hpp"

namespace finecap {

CandidateList generate_questions(const ModelContext& ctx, const std::string& q, std::size_t n) {
  if (trim(q).empty()) throw InvalidArgument("coarse caption must be non-empty");
  if (n < 1) throw InvalidArgument("N_qa must be >= 1");
  return ask_for_list(ctx, Role::kLlm, "generate_questions", {{"q", q}, {"n", std::to_string(n)}}, n);
}

namespace {

bool looks_like_refusal(std::string_view response) {
  static const std::regex kRefusal(
      R"(^\s*(I'm sorry|I am sorry|Sorry|I cannot|I can't|I can not|I'm unable|I am unable))",
      std::regex::icase);
  return std::regex_search(std::string(response), kRefusal);
}

}  // namespace

DynamicsBundle parse_answers(std::string_view response, std::span<const std::string> questions) {
  std::vector<std::string> labels;
  for (std::size_t i = 1; i <= questions.size(); ++i) labels.push_back("A" + std::to_string(i));
  labels.push_back("DESCRIPTION");
  const auto sections = parse_labeled_sections(response, labels);
  DynamicsBundle b;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto it = sections.find(labels[i]);
    if (it == sections.end()) {
      if (sections.empty() && looks_like_refusal(response)) {
        throw RefusalError("video LMM refused: " + std::string(response.substr(0, 120)));
      }
      throw ParseError("answer " + labels[i] + " missing from video LMM response");
    }
    b.pairs.push_back({questions[i], it->second});
  }
  auto desc = sections.find("DESCRIPTION");
  if (desc == sections.end()) throw ParseError("DESCRIPTION missing from video LMM response");
  b.description = desc->second;
  return b;
}

DynamicsBundle answer_and_describe(const ModelContext& ctx, const FrameSequence& frames,
                                   std::span<const std::string> questions, const std::string& q) {
  if (frames.empty()) throw InvalidArgument("answer_and_describe needs a non-empty frame sequence");
  if (questions.empty()) throw InvalidArgument("answer_and_describe needs at least one question");
  std::string timestamps, listed;
  for (std::size_t i = 0; i < frames.frames.size(); ++i) {
    if (i) timestamps += ", ";
    timestamps += nlohmann::json(frames.frames[i].timestamp).dump();
  }
  for (std::size_t i = 0; i < questions.size(); ++i) {
    listed += "Q" + std::to_string(i + 1) + ": " + questions[i] + "\n";
  }
  ChatRequest req = ctx.request(
      Role::kVideoLmm,
      ctx.prompts.render("answer_and_describe", {{"q", q},
                                                 {"timestamps", timestamps},
                                                 {"questions", listed},
                                                 {"n", std::to_string(questions.size())}}));
  for (const auto& f : frames.frames) {
    req.images.push_back(Attachment{f.timestamp, "image/png", f.png_bytes()});
  }
  try {
    return parse_answers(ctx.backends.chat(Role::kVideoLmm, req).text, questions);
  } catch (const ParseError&) {
    req.user += ctx.prompts.reprompt_suffix();
    return parse_answers(ctx.backends.chat(Role::kVideoLmm, req).text, questions);
  }
}

CandidateList rewrite_dynamics(const ModelContext& ctx, const DynamicsBundle& bundle,
                               const std::string& q, std::size_t n) {
  if (bundle.pairs.empty() || trim(bundle.description).empty()) {
    throw InvalidArgument("rewrite_dynamics needs answered questions and a description");
  }
  if (n < 1) throw InvalidArgument("N_d must be >= 1");
  std::string qa;
  for (std::size_t i = 0; i < bundle.pairs.size(); ++i) {
    qa += "Q" + std::to_string(i + 1) + ": " + bundle.pairs[i].question + "\nA" +
          std::to_string(i + 1) + ": " + bundle.pairs[i].answer + "\n";
  }
  return ask_for_list(ctx, Role::kLlm, "rewrite_dynamics",
                      {{"q", q}, {"qa", qa}, {"description", bundle.description}, {"n", std::to_string(n)}},
                      n);
}

}  // namespace finecap
