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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finecap/backends.hpp"
#include "finecap/types.hpp"

namespace finecap {

// Dual-encoder noise evaluator over frozen base embeddings:
//   similarity s(v,t) = cos(Wv v, Wt t)
//   classifier c(v,t) = w . (Wv v (*) Wt t) + b
struct EvaluatorModel {
  Eigen::MatrixXd video_proj;  // d_p x d_e
  Eigen::MatrixXd text_proj;   // d_p x d_e
  Eigen::VectorXd head_weights;  // d_p
  double head_bias = 0.0;

  std::size_t base_dim() const { return static_cast<std::size_t>(video_proj.cols()); }
  std::size_t proj_dim() const { return static_cast<std::size_t>(video_proj.rows()); }

  // First d_p rows of the d_e identity for both projections, zero head, so
  // every untrained score is exactly 0.5.
  static EvaluatorModel identity_init(std::size_t base_dim, std::size_t proj_dim);
};

std::optional<std::string> check(const EvaluatorModel& model);

struct TrainerConfig {
  double temperature = 0.07;
  double lambda_contrastive = 1.0;
  double lambda_matching = 1.0;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t pool_frames = 20;
  std::size_t proj_dim = 0;  // 0: same as the base dimension
};

std::optional<std::string> check(const TrainerConfig& cfg);

// Column i of each matrix is item i of the batch; all d_e x B.
struct TrainingBatch {
  Eigen::MatrixXd video;
  Eigen::MatrixXd caption;      // q_i
  Eigen::MatrixXd positive;     // selected positive rewrite
  Eigen::MatrixXd static_neg;   // hardest statics-disturbed negative
  Eigen::MatrixXd dynamic_neg;  // hardest dynamics-disturbed negative

  std::size_t size() const { return static_cast<std::size_t>(video.cols()); }
  // Same batch with q_i replaced by the positive rewrite; negatives unchanged.
  TrainingBatch with_positive_captions() const;
};

std::optional<std::string> check(const TrainingBatch& batch, std::size_t base_dim);

struct TrainingExample {
  EmbeddingVector video;  // pooled moment embedding
  EmbeddingVector caption;
  EmbeddingVector positive;
  EmbeddingVector static_neg;
  EmbeddingVector dynamic_neg;
};

TrainingBatch make_batch(std::span<const TrainingExample> examples);

struct Gradients {
  Eigen::MatrixXd video_proj;
  Eigen::MatrixXd text_proj;
  Eigen::VectorXd head_weights;
  double head_bias = 0.0;

  static Gradients zeros_like(const EvaluatorModel& m);
  Gradients& add_scaled(const Gradients& other, double scale);
};

struct ContrastiveLoss {
  double value = 0.0;
  double video_to_text = 0.0;  // sum of log-softmax terms over 3B captions
  double text_to_video = 0.0;  // sum of log-softmax terms over B videos
  Gradients grad;
};

struct MatchingNegatives {
  // For item i: index j != i of the trivial caption negative for v_i and of
  // the trivial video negative for q_i. Empty when B == 1.
  std::vector<std::size_t> caption_for_video;
  std::vector<std::size_t> video_for_caption;
};

struct MatchingLoss {
  double value = 0.0;
  std::size_t trivial_terms = 0;
  Gradients grad;
};

struct TotalLoss {
  double value = 0.0;
  double contrastive = 0.0;
  double contrastive_pos = 0.0;
  double matching = 0.0;
  double matching_pos = 0.0;
  Gradients grad;
};

// Deterministic, platform-independent generator for shuffling and sampling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::uint64_t state_;
};

double similarity(const EvaluatorModel& model, std::span<const double> video,
                  std::span<const double> text);
double classifier(const EvaluatorModel& model, std::span<const double> video,
                  std::span<const double> text);

// Hard-negative augmented contrastive loss. Video-to-text softmax runs over
// {q_j, static_neg_j, dynamic_neg_j} for all j (3B captions), text-to-video
// over the B videos; value = -(sum v2t + sum t2v) / 2B.
ContrastiveLoss contrastive_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                                 double temperature);

MatchingNegatives sample_matching_negatives(std::size_t batch_size, SplitMix64& rng);

// Matching loss with one sampled trivial caption negative and the two hard
// negatives per video, plus one sampled trivial video negative per caption.
MatchingLoss matching_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                           const MatchingNegatives& negatives);
MatchingLoss matching_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                           SplitMix64& rng);

// (lc/2)(l_c + l_c+) + (lm/2)(l_m + l_m+), the "+" terms using the positive
// rewrite in place of q. Both matching terms share `negatives`.
TotalLoss total_loss(const EvaluatorModel& model, const TrainingBatch& batch,
                     const TrainerConfig& cfg, const MatchingNegatives& negatives);

struct EpochLoss {
  std::size_t epoch = 0;
  double contrastive = 0.0;  // mean of (l_c + l_c+)/2 over batches
  double matching = 0.0;     // mean of (l_m + l_m+)/2 over batches
  double total = 0.0;
};

struct TrainResult {
  EvaluatorModel model;
  std::vector<EpochLoss> trace;
};

// Seeded mini-batch gradient descent from identity_init. Throws NumericError
// naming the epoch and step if the loss becomes non-finite.
TrainResult train(std::span<const TrainingExample> corpus, const TrainerConfig& cfg);
TrainResult train(std::span<const TrainingExample> corpus, const TrainerConfig& cfg,
                  EvaluatorModel init);

std::string loss_trace_csv(std::span<const EpochLoss> trace);

// Normalized mean of frame embeddings; throws NumericError on a zero mean.
EmbeddingVector pool_moment_embedding(std::span<const EmbeddingVector> frames);

// sigmoid(c(pool(frames), caption)), the caption's matching confidence.
double score(const EvaluatorModel& model, std::span<const EmbeddingVector> frames,
             std::span<const double> caption);

// Sets `selected` to the highest-scoring candidate over statics then
// dynamics (ties: static first, then lowest index). With a threshold,
// candidates scoring below it are marked filtered. No candidates: flagged
// annotation_failed and no selection.
AnnotatedMoment select_and_filter(AnnotatedMoment annotated,
                                  std::optional<double> threshold = std::nullopt);

// Binary checkpoint: magic, version, dims, provenance JSON, then row-major
// float64 blocks Wv, Wt, w, b.
void save_checkpoint(const EvaluatorModel& model, const TrainerConfig& cfg,
                     const std::filesystem::path& path);
EvaluatorModel load_checkpoint(const std::filesystem::path& path,
                               TrainerConfig* cfg_out = nullptr);

}  // namespace finecap
