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

#include "doctest.h"
#include "finecap/dynamics.hpp"
#include "finecap/errors.hpp"
#include "finecap/prompts.hpp"
#include "finecap/statics.hpp"
#include "support.hpp"

using namespace finecap;
using finecap::testing::mock_models;

namespace {

MockRule rule(Role role, std::string match, std::string output) {
  return MockRule{role, std::move(match), std::move(output)};
}

FrameRef frame_at(double t) {
  return FrameRef{t, {}, std::make_shared<Image>(Image::solid(4, 4, 100, 50, 25))};
}

FrameSequence frames(std::size_t n) {
  FrameSequence seq;
  seq.moment_key = "v@0-1";
  seq.t_e = 1.0;
  for (std::size_t i = 0; i < n; ++i) seq.frames.push_back(frame_at(0.1 * static_cast<double>(i)));
  return seq;
}

}  // namespace

TEST_CASE("frame description parsing") {
  CHECK(parse_frame_description("FG: a|BG: b|FULL: c") == FrameDescription{"a", "b", "c", 0.0});
  CHECK(parse_frame_description("FG: man\nBG: room\nFULL: a man in a room").full ==
        "a man in a room");
  CHECK_THROWS_AS(parse_frame_description("FG: a|FULL: c"), ParseError);
}

TEST_CASE("describe_keyframe parses and re-prompts once") {
  auto ok = mock_models({rule(Role::kImageLmm, "describe_keyframe", "FG: a|BG: b|FULL: c")});
  const auto d = describe_keyframe(ok.ctx, frame_at(0.5), "a dog runs");
  CHECK(d == FrameDescription{"a", "b", "c", 0.5});
  CHECK(ok.transport->sends() == 1);

  auto bad = mock_models({rule(Role::kImageLmm, "describe_keyframe", "FG: a\nFULL: c")});
  CHECK_THROWS_AS(describe_keyframe(bad.ctx, frame_at(0.5), "a dog runs"), ParseError);
  CHECK(bad.transport->sends() == 2);

  // The stricter re-prompt succeeds.
  auto fixed = mock_models({rule(Role::kImageLmm, "did not follow the required format", "FG: x|BG: y|FULL: z"),
                            rule(Role::kImageLmm, "describe_keyframe", "FG: only")});
  CHECK(describe_keyframe(fixed.ctx, frame_at(0.0), "q") == FrameDescription{"x", "y", "z", 0.0});
  CHECK(fixed.transport->sends() == 2);
  CHECK_THROWS(describe_keyframe(fixed.ctx, frame_at(0.0), "   "));
}

TEST_CASE("rewrite_statics parsing and under-count") {
  auto three = mock_models({rule(Role::kLlm, "rewrite_statics", "1. A\n2. B\n3. C")});
  const std::vector<FrameDescription> desc = {{"fg", "bg", "full", 0.5}};
  auto r = rewrite_statics(three.ctx, desc, "a dog runs", 3);
  CHECK(r.items == std::vector<std::string>{"A", "B", "C"});
  CHECK_FALSE(r.undercount);
  CHECK(three.transport->sends() == 1);

  r = rewrite_statics(three.ctx, desc, "a dog runs", 2);
  CHECK(r.items == std::vector<std::string>{"A", "B"});

  auto two = mock_models({rule(Role::kLlm, "rewrite_statics", "1. A\n2. B")});
  r = rewrite_statics(two.ctx, desc, "a dog runs", 3);
  CHECK(r.items.size() == 2);
  CHECK(r.undercount);
  CHECK(two.transport->sends() == 2);
  CHECK_THROWS_AS(rewrite_statics(two.ctx, {}, "q", 3), InvalidArgument);
}

TEST_CASE("caption_statics calls the image model once per key frame") {
  auto m = mock_models({rule(Role::kImageLmm, "describe_keyframe", "FG: a|BG: b|FULL: c"),
                        rule(Role::kLlm, "rewrite_statics", "1. A\n2. B\n3. C")});
  const std::vector<FrameRef> keys = {frame_at(0.1), frame_at(0.5), frame_at(0.9)};
  const auto r = caption_statics(m.ctx, "a dog runs", keys, 3);
  CHECK(r.descriptions.size() == 3);
  CHECK(r.descriptions[2].timestamp == 0.9);
  CHECK(m.ctx.backends.image_lmm->total_calls() == 3);
  CHECK(m.ctx.backends.llm->total_calls() == 1);
  CHECK(r.candidates.items.size() == 3);
}

TEST_CASE("rewrite prompt carries every description with its timestamp") {
  auto m = mock_models({rule(Role::kLlm, "rewrite_statics[\\s\\S]*1\\.5[\\s\\S]*first[\\s\\S]*2\\.5[\\s\\S]*second",
                             "1. ok")});
  const std::vector<FrameDescription> desc = {{"f1", "b1", "first", 1.5}, {"f2", "b2", "second", 2.5}};
  CHECK(rewrite_statics(m.ctx, desc, "q", 1).items == std::vector<std::string>{"ok"});
}

TEST_CASE("question generation") {
  const std::string five =
      "1. How?\n2. What first?\n3. With what?\n4. Repeated?\n5. How fast?";
  auto m = mock_models({rule(Role::kLlm, "generate_questions", five)});
  auto q = generate_questions(m.ctx, "a dog runs", 5);
  CHECK(q.items.size() == 5);
  CHECK_FALSE(q.undercount);
  CHECK(generate_questions(m.ctx, "a dog runs", 1).items == std::vector<std::string>{"How?"});

  auto junk = mock_models({rule(Role::kLlm, "generate_questions", "no list at all")});
  q = generate_questions(junk.ctx, "a dog runs", 5);
  CHECK(q.items.empty());
  CHECK(q.undercount);
  CHECK(junk.transport->sends() == 2);

  // Questions depend on q only: the same q gives the same request.
  auto builtin = mock_models(builtin_mock_rules());
  CHECK(generate_questions(builtin.ctx, "a man sits", 5).items ==
        generate_questions(builtin.ctx, "a man sits", 5).items);
}

TEST_CASE("answer_and_describe makes one video call") {
  const std::vector<std::string> qs = {"q1?", "q2?"};
  auto m = mock_models({rule(Role::kVideoLmm, "answer_and_describe",
                             "A1: first answer\nA2: second answer\nDESCRIPTION: it moves")});
  const auto b = answer_and_describe(m.ctx, frames(4), qs, "a dog runs");
  REQUIRE(b.pairs.size() == 2);
  CHECK(b.pairs[1] == VqaPair{"q2?", "second answer"});
  CHECK(b.description == "it moves");
  CHECK(m.ctx.backends.video_lmm->total_calls() == 1);
  CHECK_THROWS_AS(answer_and_describe(m.ctx, FrameSequence{}, qs, "a dog runs"), InvalidArgument);

  auto refuse = mock_models({rule(Role::kVideoLmm, "answer_and_describe",
                                  "I'm sorry, but I can't help with this video.")});
  CHECK_THROWS_AS(answer_and_describe(refuse.ctx, frames(2), qs, "q"), RefusalError);
  CHECK(refuse.transport->sends() == 1);

  auto partial = mock_models({rule(Role::kVideoLmm, "answer_and_describe", "A1: only one")});
  CHECK_THROWS_AS(answer_and_describe(partial.ctx, frames(2), qs, "q"), ParseError);
  CHECK(partial.transport->sends() == 2);
}

TEST_CASE("video requests carry every sampled frame") {
  auto m = mock_models({rule(Role::kVideoLmm, "answer_and_describe", "A1: {{images}}\nDESCRIPTION: d")});
  const std::vector<std::string> qs = {"q1?"};
  CHECK(answer_and_describe(m.ctx, frames(7), qs, "q").pairs[0].answer == "7");
  CHECK(m.ctx.request(Role::kVideoLmm, "x").temperature == 0.0);
}

TEST_CASE("rewrite_dynamics") {
  DynamicsBundle b{{{"q1?", "a1"}, {"q2?", "a2"}}, "desc", false};
  auto m = mock_models({rule(Role::kLlm, "rewrite_dynamics", "1. X\n2. Y\n3. Z")});
  const auto r = rewrite_dynamics(m.ctx, b, "a dog runs", 3);
  CHECK(r.items == std::vector<std::string>{"X", "Y", "Z"});
  CHECK(rewrite_dynamics(m.ctx, b, "a dog runs", 3).items == r.items);

  auto short_list = mock_models({rule(Role::kLlm, "rewrite_dynamics", "1. X")});
  CHECK(rewrite_dynamics(short_list.ctx, b, "q", 3).undercount);
  CHECK_THROWS_AS(rewrite_dynamics(m.ctx, DynamicsBundle{}, "q", 3), InvalidArgument);
}

TEST_CASE("builtin prompts render every stage") {
  const auto p = PromptTemplates::builtin();
  CHECK(p.version() >= 1);
  const std::map<std::string, std::string> vars = {
      {"q", "a dog runs"}, {"n", "3"}, {"descriptions", "d"}, {"timestamps", "0"},
      {"questions", "Q1"}, {"qa", "qa"}, {"description", "d"}, {"n_pos", "3"}, {"n_neg", "3"}};
  for (const char* stage : {"describe_keyframe", "rewrite_statics", "generate_questions",
                            "answer_and_describe", "rewrite_dynamics", "disturb_positive",
                            "disturb_static", "disturb_dynamic", "disturb_all"}) {
    CHECK(p.render(stage, vars).find("Coarse caption: a dog runs") != std::string::npos);
  }
  CHECK_THROWS(p.render("nope", vars));
  CHECK_THROWS_AS(PromptTemplates::parse("[]"), ConfigError);
}
