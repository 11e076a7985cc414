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

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "finecap/errors.hpp"
#include "finecap/evaluator.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace finecap;
using finecap::testing::Rng;

namespace {

TrainingBatch single(const EmbeddingVector& v, const EmbeddingVector& q, const EmbeddingVector& s,
                     const EmbeddingVector& d) {
  std::vector<TrainingExample> ex = {{v, q, q, s, d}};
  return make_batch(ex);
}

}  // namespace

TEST_CASE("contrastive worked example with one video") {
  const auto model = EvaluatorModel::identity_init(2, 2);
  const double h = std::sqrt(3.0) / 2.0;
  const auto batch = single({1, 0}, {1, 0}, {0.5, h}, {0.5, h});
  const auto got = contrastive_loss(model, batch, 1.0);
  const auto ref = oracle::contrastive(oracle::from(model), oracle::from(batch), 1.0);
  CHECK(got.value == doctest::Approx(ref.value).epsilon(1e-12));
  CHECK(got.text_to_video == 0.0);
  CHECK(ref.t2v == doctest::Approx(0.0));
  const double closed = 0.5 * -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0 * std::exp(0.5)));
  CHECK(got.value == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("contrastive with equal similarities is half log 3") {
  const auto model = EvaluatorModel::identity_init(3, 3);
  const auto batch = single({0, 1, 0}, {0, 1, 0}, {0, 1, 0}, {0, 1, 0});
  CHECK(contrastive_loss(model, batch, 0.07).value == doctest::Approx(0.5 * std::log(3.0)));
}

TEST_CASE("matching worked example with one video") {
  auto model = EvaluatorModel::identity_init(2, 2);
  model.head_weights << 1.0, 1.0;
  const auto batch = single({1, 1}, {1, 1}, {-1, 0}, {1, -1});
  CHECK(classifier(model, std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 2.0);
  SplitMix64 rng(3);
  const auto negs = sample_matching_negatives(1, rng);
  CHECK(negs.caption_for_video.empty());
  CHECK(negs.video_for_caption.empty());
  const auto got = matching_loss(model, batch, negs);
  CHECK(got.trivial_terms == 0);
  const auto ref = oracle::matching(oracle::from(model), oracle::from(batch), {}, {});
  CHECK(got.value == doctest::Approx(ref.value).epsilon(1e-12));
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double closed = -(std::log(sig(2)) + std::log(1 - sig(-1)) + std::log(1 - sig(0)));
  CHECK(got.value == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("matching with zero head is 3 log 2") {
  const auto model = EvaluatorModel::identity_init(4, 4);
  Rng rng(1);
  const auto batch = finecap::testing::random_batch(rng, 1, 4);
  SplitMix64 sm(0);
  CHECK(matching_loss(model, batch, sm).value == doctest::Approx(3.0 * std::log(2.0)));
}

TEST_CASE("loss values agree with the scalar oracle on random instances") {
  Rng rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t b = static_cast<std::size_t>(rng.integer(1, 6));
    const std::size_t de = static_cast<std::size_t>(rng.integer(2, 8));
    const std::size_t dp = static_cast<std::size_t>(rng.integer(1, static_cast<int>(de)));
    const auto model = finecap::testing::random_model(rng, de, dp);
    const auto batch = finecap::testing::random_batch(rng, b, de);
    const double tau = rng.uniform(0.05, 1.0);
    SplitMix64 sm(static_cast<std::uint64_t>(trial));
    const auto negs = sample_matching_negatives(b, sm);
    const auto c = contrastive_loss(model, batch, tau);
    const auto m = matching_loss(model, batch, negs);
    const auto pm = oracle::from(model);
    const auto pb = oracle::from(batch);
    CHECK(std::abs(c.value - oracle::contrastive(pm, pb, tau).value) <= 1e-9);
    const auto mo = oracle::matching(pm, pb, negs.caption_for_video, negs.video_for_caption);
    CHECK(std::abs(m.value - mo.value) <= 1e-9);
    CHECK(m.trivial_terms == mo.trivial_terms);
  }
}

TEST_CASE("trivial negatives never pick the anchor") {
  SplitMix64 sm(9);
  for (std::size_t b = 2; b < 20; ++b) {
    const auto negs = sample_matching_negatives(b, sm);
    REQUIRE(negs.caption_for_video.size() == b);
    for (std::size_t i = 0; i < b; ++i) {
      CHECK(negs.caption_for_video[i] != i);
      CHECK(negs.video_for_caption[i] != i);
      CHECK(negs.caption_for_video[i] < b);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(7);
  for (std::size_t b : {1u, 2u, 4u}) {
    for (std::size_t de : {4u, 8u}) {
      for (std::size_t dp : {2u, 4u}) {
        const auto model = finecap::testing::random_model(rng, de, dp);
        const auto batch = finecap::testing::random_batch(rng, b, de);
        TrainerConfig cfg;
        cfg.temperature = rng.uniform(0.07, 1.0);
        SplitMix64 sm(b * 100 + de * 10 + dp);
        const auto negs = sample_matching_negatives(b, sm);
        const double tau = cfg.temperature;
        CHECK(finecap::testing::max_relative_error(
                  model, contrastive_loss(model, batch, tau).grad,
                  [&](const EvaluatorModel& m) { return contrastive_loss(m, batch, tau).value; }) <=
              1e-4);
        CHECK(finecap::testing::max_relative_error(
                  model, matching_loss(model, batch, negs).grad,
                  [&](const EvaluatorModel& m) { return matching_loss(m, batch, negs).value; }) <=
              1e-4);
        CHECK(finecap::testing::max_relative_error(
                  model, total_loss(model, batch, cfg, negs).grad,
                  [&](const EvaluatorModel& m) { return total_loss(m, batch, cfg, negs).value; }) <=
              1e-4);
      }
    }
  }
}

TEST_CASE("total loss collapses and is the weighted sum of its parts") {
  Rng rng(11);
  const auto model = finecap::testing::random_model(rng, 6, 3);
  auto batch = finecap::testing::random_batch(rng, 4, 6);
  SplitMix64 sm(1);
  const auto negs = sample_matching_negatives(4, sm);

  TrainerConfig only_c;
  only_c.lambda_matching = 0.0;
  TrainingBatch same = batch;
  same.positive = same.caption;
  CHECK(total_loss(model, same, only_c, negs).value ==
        doctest::Approx(contrastive_loss(model, same, only_c.temperature).value).epsilon(1e-12));

  TrainerConfig cfg;
  const auto total = total_loss(model, batch, cfg, negs);
  const auto plus = batch.with_positive_captions();
  auto expect = Gradients::zeros_like(model);
  expect.add_scaled(contrastive_loss(model, batch, cfg.temperature).grad, 0.5)
      .add_scaled(contrastive_loss(model, plus, cfg.temperature).grad, 0.5)
      .add_scaled(matching_loss(model, batch, negs).grad, 0.5)
      .add_scaled(matching_loss(model, plus, negs).grad, 0.5);
  CHECK((total.grad.video_proj - expect.video_proj).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((total.grad.text_proj - expect.text_proj).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((total.grad.head_weights - expect.head_weights).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(total.grad.head_bias - expect.head_bias) < 1e-12);
}

TEST_CASE("contrastive loss is stable at tiny temperatures") {
  Rng rng(5);
  const auto model = finecap::testing::random_model(rng, 5, 5);
  const auto batch = finecap::testing::random_batch(rng, 3, 5);
  // Logits up to 100: the naive oracle is still exact enough here.
  const double a = contrastive_loss(model, batch, 0.01).value;
  const double b = oracle::contrastive(oracle::from(model), oracle::from(batch), 0.01).value;
  CHECK(std::abs(a - b) < 1e-9 * std::max(1.0, std::abs(b)));
  // Logits up to 1e4 overflow exp() without max subtraction.
  const double tiny = contrastive_loss(model, batch, 1e-4).value;
  CHECK(std::isfinite(tiny));
}

TEST_CASE("losses are monotone in the positive pair") {
  const auto model = EvaluatorModel::identity_init(2, 2);
  double prev = 1e9;
  for (double angle = 1.5; angle >= 0.0; angle -= 0.25) {
    const auto batch = single({1, 0}, {std::cos(angle), std::sin(angle)}, {0, 1}, {-1, 0});
    const double v = contrastive_loss(model, batch, 0.5).value;
    CHECK(v < prev);
    prev = v;
  }
  auto head = EvaluatorModel::identity_init(2, 2);
  head.head_weights << 1.0, 1.0;
  prev = 1e9;
  for (double scale = 0.5; scale <= 4.0; scale += 0.5) {
    const auto batch = single({1, 1}, {scale, scale}, {-1, 0}, {1, -1});
    SplitMix64 sm(0);
    const double v = matching_loss(head, batch, sm).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("similarity examples") {
  const auto id = EvaluatorModel::identity_init(3, 3);
  const std::vector<double> v = {0.3, -0.4, 1.2};
  CHECK(similarity(id, v, v) == doctest::Approx(1.0));
  auto orth = EvaluatorModel::identity_init(2, 2);
  orth.text_proj << 0, -1, 1, 0;  // 90 degree rotation
  CHECK(similarity(orth, std::vector<double>{1, 0}, std::vector<double>{1, 0}) ==
        doctest::Approx(0.0));
  Rng rng(3);
  const auto m = finecap::testing::random_model(rng, 6, 4);
  const auto a = rng.unit(6), b = rng.unit(6);
  CHECK(std::abs(similarity(m, a, b) - oracle::sim(oracle::from(m), a, b)) < 1e-9);
  CHECK_THROWS_AS(similarity(id, std::vector<double>{0, 0, 0}, v), NumericError);
}

TEST_CASE("pooling examples") {
  std::vector<EmbeddingVector> one = {{3, 4}};
  const auto p = pool_moment_embedding(one);
  CHECK(p[0] == doctest::Approx(0.6));
  CHECK(p[1] == doctest::Approx(0.8));
  std::vector<EmbeddingVector> anti = {{1, 0}, {-1, 0}};
  CHECK_THROWS_AS(pool_moment_embedding(anti), NumericError);
  CHECK_THROWS_AS(pool_moment_embedding({}), InvalidArgument);
  Rng rng(8);
  std::vector<EmbeddingVector> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(rng.gaussian(7));
  std::vector<double> mean(7, 0.0);
  for (const auto& f : frames) {
    for (int k = 0; k < 7; ++k) mean[k] += f[k] / 20.0;
  }
  double n = 0;
  for (double x : mean) n += x * x;
  const auto pooled = pool_moment_embedding(frames);
  for (int k = 0; k < 7; ++k) CHECK(std::abs(pooled[k] - mean[k] / std::sqrt(n)) < 1e-9);
}

TEST_CASE("untrained model scores one half") {
  const auto model = EvaluatorModel::identity_init(4, 2);
  std::vector<EmbeddingVector> frames = {{1, 2, 3, 4}};
  CHECK(score(model, frames, std::vector<double>{0.1, 0.2, 0.3, 0.4}) == 0.5);
  auto warm = model;
  warm.head_bias = 1.0;
  CHECK(score(warm, frames, std::vector<double>{0.1, 0.2, 0.3, 0.4}) > 0.5);
}

namespace {

AnnotatedMoment scored(std::vector<double> statics, std::vector<double> dynamics) {
  AnnotatedMoment a;
  a.moment = {"v", 0.0, 1.0, "q", Split::kTrain};
  for (double s : statics) a.statics.push_back({"s", CaptionKind::kStatic, s, false});
  for (double s : dynamics) a.dynamics.push_back({"d", CaptionKind::kDynamic, s, false});
  return a;
}

}  // namespace

TEST_CASE("select_and_filter examples") {
  auto a = select_and_filter(scored({0.9, 0.2}, {0.7}));
  REQUIRE(a.selected);
  CHECK(*a.selected == Selection{CaptionKind::kStatic, 0});

  a = select_and_filter(scored({0.8}, {0.8}));
  CHECK(*a.selected == Selection{CaptionKind::kStatic, 0});

  a = select_and_filter(scored({0.9, 0.2}, {0.7}), 0.5);
  int filtered = 0;
  for (const auto& c : a.statics) filtered += c.filtered;
  for (const auto& c : a.dynamics) filtered += c.filtered;
  CHECK(filtered == 1);
  CHECK(a.statics[1].filtered);

  a = select_and_filter(scored({}, {}));
  CHECK_FALSE(a.selected);
  CHECK(a.has_flag(flags::kAnnotationFailed));

  auto unscored = scored({0.1}, {});
  unscored.statics[0].score.reset();
  CHECK_THROWS_AS(select_and_filter(unscored), InvalidArgument);
}

TEST_CASE("select_and_filter matches the exhaustive scan") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s, d;
    const int ns = rng.integer(0, 3), nd = rng.integer(0, 3);
    // Coarse grid so ties are frequent.
    for (int i = 0; i < ns; ++i) s.push_back(rng.integer(1, 4) / 5.0);
    for (int i = 0; i < nd; ++i) d.push_back(rng.integer(1, 4) / 5.0);
    const auto in = scored(s, d);
    CHECK(select_and_filter(in).selected == oracle::argmax_selection(in));
  }
}

namespace {

std::vector<TrainingExample> separable_corpus(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  auto noisy = [&](const EmbeddingVector& v) {
    EmbeddingVector t = v;
    for (auto& x : t) x += 0.05 * rng.normal();
    return normalized(t);
  };
  auto rotated = [&](const EmbeddingVector& v) {
    auto u = rng.unit(d);
    const double p = dot(u, v);
    for (std::size_t k = 0; k < d; ++k) u[k] -= p * v[k];
    u = normalized(u);
    const double theta = rng.uniform(M_PI / 3.0, M_PI / 2.0);
    EmbeddingVector t(d);
    for (std::size_t k = 0; k < d; ++k) t[k] = std::cos(theta) * v[k] + std::sin(theta) * u[k];
    return t;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = rng.unit(d);
    out.push_back({v, noisy(v), noisy(v), rotated(v), rotated(v)});
  }
  return out;
}

bool same_model(const EvaluatorModel& a, const EvaluatorModel& b) {
  return a.video_proj == b.video_proj && a.text_proj == b.text_proj &&
         a.head_weights == b.head_weights && a.head_bias == b.head_bias;
}

}  // namespace

TEST_CASE("training separates positives from negatives") {
  const auto corpus = separable_corpus(120, 16, 3);
  TrainerConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 5;
  const auto res = train(std::span<const TrainingExample>(corpus.data(), 100), cfg);
  REQUIRE(res.trace.size() == 5);
  CHECK(res.trace.back().total < res.trace.front().total);
  double pos = 0, neg = 0;
  for (std::size_t i = 100; i < 120; ++i) {
    std::vector<EmbeddingVector> f = {corpus[i].video};
    pos += score(res.model, f, corpus[i].caption);
    neg += score(res.model, f, corpus[i].static_neg);
  }
  CHECK(pos > neg);
}

TEST_CASE("training edge cases") {
  const auto corpus = separable_corpus(20, 4, 1);
  TrainerConfig cfg;
  cfg.epochs = 0;
  const auto none = train(corpus, cfg);
  CHECK(same_model(none.model, EvaluatorModel::identity_init(4, 4)));
  CHECK(none.trace.empty());

  cfg.epochs = 2;
  cfg.seed = 17;
  const auto a = train(corpus, cfg);
  const auto b = train(corpus, cfg);
  CHECK(same_model(a.model, b.model));
  cfg.seed = 18;
  CHECK_FALSE(same_model(a.model, train(corpus, cfg).model));

  cfg.learning_rate = 1e300;
  CHECK_THROWS_AS(train(corpus, cfg), NumericError);

  CHECK_THROWS_AS(train({}, TrainerConfig{}), InvalidArgument);
  TrainerConfig bad;
  bad.temperature = 0.0;
  CHECK(check(bad).has_value());
}

TEST_CASE("loss trace csv has one row per epoch") {
  std::vector<EpochLoss> trace = {{1, 0.5, 0.25, 0.75}, {2, 0.4, 0.2, 0.6}};
  const auto csv = loss_trace_csv(trace);
  CHECK(csv.rfind("epoch,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("checkpoint round trip and corruption") {
  finecap::testing::TempDir dir;
  Rng rng(2);
  const auto model = finecap::testing::random_model(rng, 5, 3);
  TrainerConfig cfg;
  cfg.seed = 99;
  cfg.epochs = 7;
  save_checkpoint(model, cfg, dir / "m.ckpt");
  TrainerConfig back;
  const auto loaded = load_checkpoint(dir / "m.ckpt", &back);
  CHECK(same_model(model, loaded));
  CHECK(back.seed == 99);
  CHECK(back.epochs == 7);

  std::string bytes = read_file(dir / "m.ckpt");
  finecap::testing::write_text(dir / "trail.ckpt", bytes + "x");
  CHECK_THROWS(load_checkpoint(dir / "trail.ckpt"));
  bytes[0] = 'X';
  finecap::testing::write_text(dir / "magic.ckpt", bytes);
  CHECK_THROWS(load_checkpoint(dir / "magic.ckpt"));
  finecap::testing::write_text(dir / "short.ckpt", bytes.substr(0, 20));
  CHECK_THROWS(load_checkpoint(dir / "short.ckpt"));
}
