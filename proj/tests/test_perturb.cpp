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

#include <algorithm>

#include "doctest.h"
#include "finecap/errors.hpp"
#include "finecap/perturb.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace finecap;
using finecap::testing::mock_models;
using finecap::testing::Rng;

namespace {

MockRule rule(std::string match, std::string output) {
  return MockRule{Role::kLlm, std::move(match), std::move(output)};
}

std::vector<MockRule> three_each() {
  return {rule("disturb_positive", "1. p one\n2. p two\n3. p three"),
          rule("disturb_static", "1. s one\n2. s two\n3. s three"),
          rule("disturb_dynamic", "1. d one\n2. d two\n3. d three")};
}

}  // namespace

TEST_CASE("generate_disturbed yields three lists") {
  auto m = mock_models(three_each());
  const auto c = generate_disturbed(m.ctx, "a dog runs", 3, 3);
  CHECK(c.positives.size() == 3);
  CHECK(c.static_negs.size() == 3);
  CHECK(c.dynamic_negs.size() == 3);
  CHECK(c.flags.empty());
  CHECK(m.transport->sends() == 3);

  auto builtin = mock_models(builtin_mock_rules());
  const auto b = generate_disturbed(builtin.ctx, "a man sits on a chair", 3, 3);
  CHECK(b.positives.size() == 3);
  CHECK(b.static_negs.size() == 3);
  CHECK(b.dynamic_negs.size() == 3);
}

TEST_CASE("negatives equal to q are dropped and flagged") {
  auto m = mock_models({rule("disturb_positive", "1. a\n2. b\n3. c"),
                        rule("disturb_static", "1. A  Dog runs.\n2. s two\n3. s three"),
                        rule("disturb_dynamic", "1. d one\n2. d two\n3. d three")});
  const auto c = generate_disturbed(m.ctx, "a dog runs", 3, 3);
  CHECK(c.static_negs == std::vector<std::string>{"s two", "s three"});
  CHECK(std::find(c.flags.begin(), c.flags.end(), std::string(flags::kNegativeDuplicateDropped)) !=
        c.flags.end());
}

TEST_CASE("under-count is flagged") {
  auto m = mock_models({rule("disturb_positive", "1. a"), rule("disturb_static", "1. s\n2. t\n3. u"),
                        rule("disturb_dynamic", "1. d\n2. e\n3. f")});
  const auto c = generate_disturbed(m.ctx, "q", 3, 3);
  CHECK(c.positives.size() == 1);
  CHECK(c.flags == std::vector<std::string>{std::string(flags::kPositivesUndercount)});
}

TEST_CASE("single-call mode") {
  auto m = mock_models({rule("disturb_all",
                             "POSITIVE:\n1. a\n2. b\n3. c\nSTATIC:\n1. d\n2. e\n3. f\nDYNAMIC:\n1. g\n2. h\n3. i")});
  const auto c = generate_disturbed(m.ctx, "q", 3, 3, true);
  CHECK(c.positives == std::vector<std::string>{"a", "b", "c"});
  CHECK(c.dynamic_negs == std::vector<std::string>{"g", "h", "i"});
  CHECK(m.transport->sends() == 1);
}

TEST_CASE("distance selection examples") {
  CHECK(argmin_first(std::vector<double>{0.2, 0.5, 0.1}) == 2);
  CHECK(argmax_first(std::vector<double>{0.2, 0.9, 0.9}) == 1);
  CHECK(argmin_first(std::vector<double>{0.3, 0.3}) == 0);
  CHECK_THROWS_AS(argmax_first(std::vector<double>{}), InvalidArgument);
  const auto b = select_by_distance(std::vector<double>{0.2, 0.5, 0.1}, std::vector<double>{0.2, 0.9, 0.9},
                                    std::vector<double>{1.0});
  CHECK(b == BestIndices{2, 1, 0});
}

TEST_CASE("argmin and argmax match a full scan") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(1, 8)));
    for (auto& x : v) x = rng.integer(0, 4) * 0.25;
    CHECK(argmin_first(v) == oracle::scan_min(v));
    CHECK(argmax_first(v) == oracle::scan_max(v));
  }
}

TEST_CASE("select_best embeds once and matches the scan") {
  const std::vector<std::string> words = {"dog", "runs", "cat", "sits", "red", "fast", "the", "a"};
  Rng rng(12);
  MockEmbedder embedder(16, 3);
  MockEmbedder reference(16, 3);
  for (int trial = 0; trial < 200; ++trial) {
    auto text = [&] {
      std::string s = rng.pick(words);
      for (int i = rng.integer(0, 3); i > 0; --i) s += " " + rng.pick(words);
      return s;
    };
    auto list = [&] {
      std::vector<std::string> l(static_cast<std::size_t>(rng.integer(1, 4)));
      for (auto& s : l) s = text();
      return l;
    };
    const std::string q = text();
    const auto p = list(), s = list(), d = list();
    const std::size_t before = embedder.calls();
    const auto best = select_best(q, p, s, d, embedder);
    CHECK(embedder.calls() == before + 1);

    auto dist = [&](const std::vector<std::string>& l) {
      std::vector<std::string> one = {q};
      const auto qv = reference.embed(one)[0];
      std::vector<double> out;
      for (const auto& t : l) {
        std::vector<std::string> single = {t};
        out.push_back(semantic_distance(reference.embed(single)[0], qv));
      }
      return out;
    };
    CHECK(best.indices.positive == oracle::scan_min(dist(p)));
    CHECK(best.indices.static_neg == oracle::scan_max(dist(s)));
    CHECK(best.indices.dynamic_neg == oracle::scan_max(dist(d)));
    CHECK(best.positive == p[best.indices.positive]);
  }
  const std::vector<std::string> none;
  CHECK_THROWS_AS(select_best("q", none, none, none, embedder), InvalidArgument);
}

TEST_CASE("selection ignores positive rescaling") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = rng.gaussian(8);
    std::vector<std::vector<double>> c(4);
    for (auto& v : c) v = rng.gaussian(8);
    std::vector<double> d1, d2;
    const double k = rng.uniform(0.1, 10.0);
    for (const auto& v : c) {
      d1.push_back(semantic_distance(v, q));
      std::vector<double> scaled = v;
      for (auto& x : scaled) x *= k;
      d2.push_back(semantic_distance(scaled, q));
    }
    CHECK(argmin_first(d1) == argmin_first(d2));
    CHECK(argmax_first(d1) == argmax_first(d2));
  }
}

TEST_CASE("training corpus records per-moment failures") {
  std::vector<MockRule> rules = {rule("Coarse caption: broken moment", "!fail:network")};
  for (auto& r : three_each()) rules.push_back(r);
  auto m = mock_models(rules);
  std::vector<MomentRecord> moments;
  for (int i = 0; i < 10; ++i) {
    moments.push_back({"v" + std::to_string(i), 0.0, 1.0, i == 6 ? "broken moment" : "moment " + std::to_string(i),
                       Split::kTrain});
  }
  PerturbConfig cfg;
  cfg.workers = 3;
  const auto corpus = build_training_corpus(m.ctx, moments, cfg);
  CHECK(corpus.sets.size() == 9);
  REQUIRE(corpus.skipped.size() == 1);
  CHECK(corpus.skipped[0].moment_key == moments[6].key());
  for (std::size_t i = 0; i < corpus.sets.size(); ++i) {
    CHECK_FALSE(check(corpus.sets[i]).has_value());
  }
  CHECK(corpus.sets[6].source == moments[7]);
  // q and every candidate go through one embed call per moment.
  CHECK(m.embedder->calls() == 9);
}
