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

#include "finecap/evaluator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "finecap/errors.hpp"
#include "finecap/io.hpp"
#include "json.hpp"

namespace finecap {

using Eigen::MatrixXd;
using Eigen::VectorXd;

EvaluatorModel EvaluatorModel::identity_init(std::size_t base_dim, std::size_t proj_dim) {
  if (base_dim == 0 || proj_dim == 0) throw InvalidArgument("model dimensions must be positive");
  if (proj_dim > base_dim) {
    throw InvalidArgument("projection dim " + std::to_string(proj_dim) +
                          " exceeds base dim " + std::to_string(base_dim));
  }
  const auto dp = static_cast<Eigen::Index>(proj_dim), de = static_cast<Eigen::Index>(base_dim);
  EvaluatorModel m;
  m.video_proj = MatrixXd::Identity(dp, de);
  m.text_proj = MatrixXd::Identity(dp, de);
  m.head_weights = VectorXd::Zero(dp);
  m.head_bias = 0.0;
  return m;
}

std::optional<std::string> check(const EvaluatorModel& m) {
  if (m.video_proj.size() == 0) return "non-empty projections";
  if (m.text_proj.rows() != m.video_proj.rows() || m.text_proj.cols() != m.video_proj.cols()) {
    return "projection shapes agree";
  }
  if (m.head_weights.size() != m.video_proj.rows()) return "head dimension equals d_p";
  if (!m.video_proj.allFinite() || !m.text_proj.allFinite() || !m.head_weights.allFinite() ||
      !std::isfinite(m.head_bias)) {
    return "all parameters finite";
  }
  return std::nullopt;
}

std::optional<std::string> check(const TrainerConfig& c) {
  if (!(c.temperature > 0.0)) return "tau > 0";
  if (!(c.lambda_contrastive >= 0.0) || !(c.lambda_matching >= 0.0)) return "lambda_c, lambda_m >= 0";
  if (c.batch_size < 1) return "B >= 1";
  if (!(c.learning_rate > 0.0)) return "learning rate > 0";
  if (c.pool_frames < 1) return "pool frames >= 1";
  return std::nullopt;
}

TrainingBatch TrainingBatch::with_positive_captions() const {
  TrainingBatch b = *this;
  b.caption = positive;
  return b;
}

std::optional<std::string> check(const TrainingBatch& b, std::size_t base_dim) {
  const auto n = b.video.cols();
  if (n < 1) return "B >= 1";
  for (const MatrixXd* m : {&b.video, &b.caption, &b.positive, &b.static_neg, &b.dynamic_neg}) {
    if (m->cols() != n) return "all fields carry B items";
    if (static_cast<std::size_t>(m->rows()) != base_dim) return "all vectors have dimension d_e";
    if (!m->allFinite()) return "finite embeddings";
  }
  return std::nullopt;
}

TrainingBatch make_batch(std::span<const TrainingExample> examples) {
  if (examples.empty()) throw InvalidArgument("empty batch");
  const auto de = static_cast<Eigen::Index>(examples.front().video.size());
  const auto n = static_cast<Eigen::Index>(examples.size());
  TrainingBatch b;
  for (MatrixXd* m : {&b.video, &b.caption, &b.positive, &b.static_neg, &b.dynamic_neg}) {
    m->resize(de, n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    auto put = [&](MatrixXd& m, const EmbeddingVector& v) {
      if (static_cast<Eigen::Index>(v.size()) != de) throw InvalidArgument("inconsistent embedding dimension");
      m.col(i) = Eigen::Map<const VectorXd>(v.data(), de);
    };
    put(b.video, ex.video);
    put(b.caption, ex.caption);
    put(b.positive, ex.positive);
    put(b.static_neg, ex.static_neg);
    put(b.dynamic_neg, ex.dynamic_neg);
  }
  return b;
}

Gradients Gradients::zeros_like(const EvaluatorModel& m) {
  Gradients g;
  g.video_proj = MatrixXd::Zero(m.video_proj.rows(), m.video_proj.cols());
  g.text_proj = MatrixXd::Zero(m.text_proj.rows(), m.text_proj.cols());
  g.head_weights = VectorXd::Zero(m.head_weights.size());
  g.head_bias = 0.0;
  return g;
}

Gradients& Gradients::add_scaled(const Gradients& o, double scale) {
  video_proj += scale * o.video_proj;
  text_proj += scale * o.text_proj;
  head_weights += scale * o.head_weights;
  head_bias += scale * o.head_bias;
  return *this;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t SplitMix64::below(std::size_t n) {
  if (n == 0) throw InvalidArgument("below(0)");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

namespace {

void require_model(const EvaluatorModel& m) {
  if (auto err = check(m)) throw InvalidArgument("evaluator model: " + *err);
}

void require_batch(const EvaluatorModel& m, const TrainingBatch& b) {
  require_model(m);
  if (auto err = check(b, m.base_dim())) throw InvalidArgument("training batch: " + *err);
}

struct Projected {
  MatrixXd raw;
  VectorXd norms;
  MatrixXd unit;
};

Projected project_unit(const MatrixXd& weights, const MatrixXd& x) {
  Projected p;
  p.raw = weights * x;
  p.norms = p.raw.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < p.norms.size(); ++i) {
    if (!(p.norms(i) > 0.0) || !std::isfinite(p.norms(i))) {
      throw NumericError("zero-norm projection");
    }
  }
  p.unit = p.raw * p.norms.cwiseInverse().asDiagonal();
  return p;
}

// Gradient w.r.t. raw projections given the gradient w.r.t. their unit
// vectors: (g - (g.u)u) / |p| per column.
MatrixXd unit_backprop(const MatrixXd& grad_unit, const Projected& p) {
  MatrixXd out = grad_unit;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double along = grad_unit.col(i).dot(p.unit.col(i));
    out.col(i) = (grad_unit.col(i) - along * p.unit.col(i)) / p.norms(i);
  }
  return out;
}

MatrixXd stack_captions(const TrainingBatch& b) {
  const Eigen::Index n = b.video.cols();
  MatrixXd t(b.video.rows(), 3 * n);
  t << b.caption, b.static_neg, b.dynamic_neg;
  return t;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

double similarity(const EvaluatorModel& model, std::span<const double> video,
                  std::span<const double> text) {
  require_model(model);
  if (video.size() != model.base_dim() || text.size() != model.base_dim()) {
    throw InvalidArgument("similarity: embedding dimension does not match the model");
  }
  const auto de = static_cast<Eigen::Index>(model.base_dim());
  const VectorXd pv = model.video_proj * Eigen::Map<const VectorXd>(video.data(), de);
  const VectorXd pt = model.text_proj * Eigen::Map<const VectorXd>(text.data(), de);
  const double nv = pv.norm(), nt = pt.norm();
  if (!(nv > 0.0) || !(nt > 0.0)) throw NumericError("zero-norm projection");
  return pv.dot(pt) / (nv * nt);
}

double classifier(const EvaluatorModel& model, std::span<const double> video,
                  std::span<const double> text) {
  require_model(model);
  if (video.size() != model.base_dim() || text.size() != model.base_dim()) {
    throw InvalidArgument("classifier: embedding dimension does not match the model");
  }
  const auto de = static_cast<Eigen::Index>(model.base_dim());
  const VectorXd pv = model.video_proj * Eigen::Map<const VectorXd>(video.data(), de);
  const VectorXd pt = model.text_proj * Eigen::Map<const VectorXd>(text.data(), de);
  return model.head_weights.dot(pv.cwiseProduct(pt)) + model.head_bias;
}

ContrastiveLoss contrastive_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                                 double temperature) {
  require_batch(model, batch);
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  const Eigen::Index n = batch.video.cols();
  const MatrixXd captions = stack_captions(batch);
  const Projected pv = project_unit(model.video_proj, batch.video);
  const Projected pt = project_unit(model.text_proj, captions);
  const MatrixXd sim = pv.unit.transpose() * pt.unit;  // B x 3B
  const double coef = -1.0 / (2.0 * static_cast<double>(n));

  ContrastiveLoss out;
  MatrixXd grad_sim = MatrixXd::Zero(n, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd logits = sim.row(i).transpose() / temperature;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    out.video_to_text += logits(i) - lse;
    const VectorXd prob = (logits.array() - lse).exp();
    for (Eigen::Index k = 0; k < 3 * n; ++k) {
      grad_sim(i, k) += coef * ((k == i ? 1.0 : 0.0) - prob(k)) / temperature;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    // s(q_i, v_j) for j over the B videos.
    const VectorXd logits = sim.col(i).head(n) / temperature;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    out.text_to_video += logits(i) - lse;
    const VectorXd prob = (logits.array() - lse).exp();
    for (Eigen::Index j = 0; j < n; ++j) {
      grad_sim(j, i) += coef * ((j == i ? 1.0 : 0.0) - prob(j)) / temperature;
    }
  }
  out.value = coef * (out.video_to_text + out.text_to_video);
  require_finite(out.value, "contrastive loss");

  const MatrixXd grad_pv = unit_backprop(pt.unit * grad_sim.transpose(), pv);
  const MatrixXd grad_pt = unit_backprop(pv.unit * grad_sim, pt);
  out.grad = Gradients::zeros_like(model);
  out.grad.video_proj = grad_pv * batch.video.transpose();
  out.grad.text_proj = grad_pt * captions.transpose();
  return out;
}

MatchingNegatives sample_matching_negatives(std::size_t batch_size, SplitMix64& rng) {
  MatchingNegatives neg;
  if (batch_size < 2) return neg;
  auto other = [&](std::size_t i) {
    std::size_t j = rng.below(batch_size - 1);
    return j >= i ? j + 1 : j;
  };
  for (std::size_t i = 0; i < batch_size; ++i) {
    neg.caption_for_video.push_back(other(i));
    neg.video_for_caption.push_back(other(i));
  }
  return neg;
}

MatchingLoss matching_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                           const MatchingNegatives& negatives) {
  require_batch(model, batch);
  const std::size_t n = batch.size();
  const bool trivial = n >= 2;
  if (trivial && (negatives.caption_for_video.size() != n || negatives.video_for_caption.size() != n)) {
    throw InvalidArgument("matching negatives must name one trivial negative per item");
  }
  const MatrixXd captions = stack_captions(batch);
  const MatrixXd pv = model.video_proj * batch.video;
  const MatrixXd pt = model.text_proj * captions;
  const VectorXd& w = model.head_weights;
  const double coef = -1.0 / static_cast<double>(n);

  MatchingLoss out;
  out.grad = Gradients::zeros_like(model);
  MatrixXd grad_pv = MatrixXd::Zero(pv.rows(), pv.cols());
  MatrixXd grad_pt = MatrixXd::Zero(pt.rows(), pt.cols());
  double sum = 0.0;
  auto pair = [&](Eigen::Index v, Eigen::Index t, bool positive) {
    const VectorXd prod = pv.col(v).cwiseProduct(pt.col(t));
    const double c = w.dot(prod) + model.head_bias;
    sum += positive ? -softplus(-c) : -softplus(c);
    const double dc = coef * ((positive ? 1.0 : 0.0) - sigmoid(c));
    out.grad.head_weights += dc * prod;
    out.grad.head_bias += dc;
    grad_pv.col(v) += dc * w.cwiseProduct(pt.col(t));
    grad_pt.col(t) += dc * w.cwiseProduct(pv.col(v));
  };
  const auto bn = static_cast<Eigen::Index>(n);
  for (Eigen::Index i = 0; i < bn; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    pair(i, i, true);
    if (trivial) {
      const auto j = static_cast<Eigen::Index>(negatives.caption_for_video[ui]);
      if (j == i || j >= bn) throw InvalidArgument("trivial negative must be another item");
      pair(i, j, false);
      ++out.trivial_terms;
    }
    pair(i, bn + i, false);
    pair(i, 2 * bn + i, false);
    if (trivial) {
      const auto j = static_cast<Eigen::Index>(negatives.video_for_caption[ui]);
      if (j == i || j >= bn) throw InvalidArgument("trivial negative must be another item");
      pair(j, i, false);
      ++out.trivial_terms;
    }
  }
  out.value = coef * sum;
  require_finite(out.value, "matching loss");
  out.grad.video_proj = grad_pv * batch.video.transpose();
  out.grad.text_proj = grad_pt * captions.transpose();
  return out;
}

MatchingLoss matching_loss(const EvaluatorModel& model, const TrainingBatch& batch, SplitMix64& rng) {
  return matching_loss(model, batch, sample_matching_negatives(batch.size(), rng));
}

TotalLoss total_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                     const TrainerConfig& cfg, const MatchingNegatives& negatives) {
  if (auto err = check(cfg)) throw InvalidArgument("trainer config: " + *err);
  const TrainingBatch plus = batch.with_positive_captions();
  const auto lc = contrastive_loss(model, batch, cfg.temperature);
  const auto lc_pos = contrastive_loss(model, plus, cfg.temperature);
  const auto lm = matching_loss(model, batch, negatives);
  const auto lm_pos = matching_loss(model, plus, negatives);
  const double wc = cfg.lambda_contrastive / 2.0, wm = cfg.lambda_matching / 2.0;
  TotalLoss out;
  out.contrastive = lc.value;
  out.contrastive_pos = lc_pos.value;
  out.matching = lm.value;
  out.matching_pos = lm_pos.value;
  out.value = wc * (lc.value + lc_pos.value) + wm * (lm.value + lm_pos.value);
  out.grad = Gradients::zeros_like(model);
  out.grad.add_scaled(lc.grad, wc)
      .add_scaled(lc_pos.grad, wc)
      .add_scaled(lm.grad, wm)
      .add_scaled(lm_pos.grad, wm);
  return out;
}

TrainResult train(std::span<const TrainingExample> corpus, const TrainerConfig& cfg) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  const std::size_t de = corpus.front().video.size();
  const std::size_t dp = cfg.proj_dim == 0 ? de : cfg.proj_dim;
  return train(corpus, cfg, EvaluatorModel::identity_init(de, dp));
}

TrainResult train(std::span<const TrainingExample> corpus, const TrainerConfig& cfg,
                  EvaluatorModel init) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  if (auto err = check(cfg)) throw InvalidArgument("trainer config: " + *err);
  require_model(init);
  TrainResult result{std::move(init), {}};
  EvaluatorModel& m = result.model;
  SplitMix64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    EpochLoss acc{epoch, 0.0, 0.0, 0.0};
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<TrainingExample> items;
      for (std::size_t k = start; k < end; ++k) items.push_back(corpus[order[k]]);
      const TrainingBatch batch = make_batch(items);
      const auto negatives = sample_matching_negatives(batch.size(), rng);
      TotalLoss loss;
      try {
        loss = total_loss(m, batch, cfg, negatives);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps + 1) + ": " + e.what());
      }
      if (!std::isfinite(loss.value) || !loss.grad.video_proj.allFinite() ||
          !loss.grad.text_proj.allFinite() || !loss.grad.head_weights.allFinite() ||
          !std::isfinite(loss.grad.head_bias)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps + 1));
      }
      m.video_proj -= cfg.learning_rate * loss.grad.video_proj;
      m.text_proj -= cfg.learning_rate * loss.grad.text_proj;
      m.head_weights -= cfg.learning_rate * loss.grad.head_weights;
      m.head_bias -= cfg.learning_rate * loss.grad.head_bias;
      acc.contrastive += 0.5 * (loss.contrastive + loss.contrastive_pos);
      acc.matching += 0.5 * (loss.matching + loss.matching_pos);
      acc.total += loss.value;
      ++steps;
    }
    acc.contrastive /= static_cast<double>(steps);
    acc.matching /= static_cast<double>(steps);
    acc.total /= static_cast<double>(steps);
    result.trace.push_back(acc);
  }
  return result;
}

std::string loss_trace_csv(std::span<const EpochLoss> trace) {
  std::ostringstream out;
  out << "epoch,l_c,l_m,l\n";
  char buf[128];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.contrastive, e.matching,
                  e.total);
    out << buf;
  }
  return out.str();
}

EmbeddingVector pool_moment_embedding(std::span<const EmbeddingVector> frames) {
  if (frames.empty()) throw InvalidArgument("cannot pool zero frame embeddings");
  const std::size_t d = frames.front().size();
  EmbeddingVector mean(d, 0.0);
  for (const auto& f : frames) {
    if (f.size() != d) throw InvalidArgument("frame embeddings differ in dimension");
    for (std::size_t k = 0; k < d; ++k) mean[k] += f[k];
  }
  for (double& x : mean) x /= static_cast<double>(frames.size());
  const double n = norm(mean);
  if (!(n > 1e-12) || !std::isfinite(n)) throw NumericError("degenerate pool: mean frame embedding is zero");
  for (double& x : mean) x /= n;
  return mean;
}

double score(const EvaluatorModel& model, std::span<const EmbeddingVector> frames,
             std::span<const double> caption) {
  const EmbeddingVector pooled = pool_moment_embedding(frames);
  return sigmoid(classifier(model, pooled, caption));
}

AnnotatedMoment select_and_filter(AnnotatedMoment a, std::optional<double> threshold) {
  std::optional<Selection> best;
  double best_score = 0.0;
  auto scan = [&](std::vector<CaptionCandidate>& list, CaptionKind kind) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto& c = list[i];
      if (!c.score) {
        throw InvalidArgument("candidate " + std::string(to_string(kind)) + "[" + std::to_string(i) +
                              "] of " + a.moment.key() + " is unscored");
      }
      c.filtered = threshold.has_value() && *c.score < *threshold;
      if (!best || *c.score > best_score) {
        best = Selection{kind, i};
        best_score = *c.score;
      }
    }
  };
  scan(a.statics, CaptionKind::kStatic);
  scan(a.dynamics, CaptionKind::kDynamic);
  a.selected = best;
  if (!best) a.add_flag(std::string(flags::kAnnotationFailed));
  return a;
}

namespace {

constexpr char kMagic[8] = {'F', 'C', 'E', 'V', 'A', 'L', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("truncated checkpoint");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

nlohmann::json config_json(const TrainerConfig& c) {
  return {{"temperature", c.temperature},   {"lambda_contrastive", c.lambda_contrastive},
          {"lambda_matching", c.lambda_matching}, {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"seed", c.seed},                 {"pool_frames", c.pool_frames},
          {"proj_dim", c.proj_dim}};
}

}  // namespace

void save_checkpoint(const EvaluatorModel& model, const TrainerConfig& cfg,
                     const std::filesystem::path& path) {
  require_model(model);
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.base_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.proj_dim()));
  const std::string provenance = config_json(cfg).dump();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(provenance.size()));
  out += provenance;
  for (const MatrixXd* m : {&model.video_proj, &model.text_proj}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) put_le<double>(out, (*m)(r, c));
    }
  }
  for (Eigen::Index k = 0; k < model.head_weights.size(); ++k) put_le<double>(out, model.head_weights(k));
  put_le<double>(out, model.head_bias);
  write_file_atomic(path, out);
}

EvaluatorModel load_checkpoint(const std::filesystem::path& path, TrainerConfig* cfg_out) {
  const std::string in = read_file(path);
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not an evaluator checkpoint: " + path.string());
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(in, pos);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto de = get_le<std::uint32_t>(in, pos);
  const auto dp = get_le<std::uint32_t>(in, pos);
  const auto len = get_le<std::uint32_t>(in, pos);
  if (pos + len > in.size()) throw IoError("truncated checkpoint");
  const std::string provenance = in.substr(pos, len);
  pos += len;
  if (cfg_out) {
    try {
      const auto j = nlohmann::json::parse(provenance);
      TrainerConfig c;
      c.temperature = j.at("temperature").get<double>();
      c.lambda_contrastive = j.at("lambda_contrastive").get<double>();
      c.lambda_matching = j.at("lambda_matching").get<double>();
      c.batch_size = j.at("batch_size").get<std::size_t>();
      c.learning_rate = j.at("learning_rate").get<double>();
      c.epochs = j.at("epochs").get<std::size_t>();
      c.seed = j.at("seed").get<std::uint64_t>();
      c.pool_frames = j.at("pool_frames").get<std::size_t>();
      c.proj_dim = j.at("proj_dim").get<std::size_t>();
      *cfg_out = c;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("bad checkpoint provenance: ") + e.what());
    }
  }
  EvaluatorModel m = EvaluatorModel::identity_init(de, dp);
  for (MatrixXd* mat : {&m.video_proj, &m.text_proj}) {
    for (Eigen::Index r = 0; r < mat->rows(); ++r) {
      for (Eigen::Index c = 0; c < mat->cols(); ++c) (*mat)(r, c) = get_le<double>(in, pos);
    }
  }
  for (Eigen::Index k = 0; k < m.head_weights.size(); ++k) m.head_weights(k) = get_le<double>(in, pos);
  m.head_bias = get_le<double>(in, pos);
  if (pos != in.size()) throw IoError("trailing bytes in checkpoint");
  require_model(m);
  return m;
}

}  // namespace finecap
