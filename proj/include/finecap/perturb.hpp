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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "finecap/model_context.hpp"
#include "finecap/types.hpp"

namespace finecap {

struct PerturbConfig {
  std::size_t n_pos = 3;
  std::size_t n_neg = 3;
  bool single_call = false;  // one multi-section LLM call instead of three
  std::size_t workers = 4;
};

struct DisturbedCandidates {
  std::vector<std::string> positives;
  std::vector<std::string> static_negs;
  std::vector<std::string> dynamic_negs;
  std::vector<std::string> flags;  // sorted
};

// Positive rewrites plus statics- and dynamics-disturbed negatives of q.
// Negatives equal to q after normalize_caption are dropped and flagged.
DisturbedCandidates generate_disturbed(const ModelContext& ctx, const std::string& q,
                                       std::size_t n_pos, std::size_t n_neg,
                                       bool single_call = false);

struct BestIndices {
  std::size_t positive = 0;
  std::size_t static_neg = 0;
  std::size_t dynamic_neg = 0;

  friend bool operator==(const BestIndices&, const BestIndices&) = default;
};

// Index of the smallest / largest value; ties go to the lowest index.
std::size_t argmin_first(std::span<const double> values);
std::size_t argmax_first(std::span<const double> values);

// Closest positive, farthest negatives, given distances to q.
BestIndices select_by_distance(std::span<const double> pos_dist,
                               std::span<const double> static_dist,
                               std::span<const double> dynamic_dist);

struct BestCaptions {
  std::string positive;
  std::string static_neg;
  std::string dynamic_neg;
  BestIndices indices;
};

// Embeds q and every candidate in a single embedder call, then selects by
// semantic distance to q.
BestCaptions select_best(const std::string& q, std::span<const std::string> positives,
                         std::span<const std::string> static_negs,
                         std::span<const std::string> dynamic_negs, Embedder& embedder);

struct SkipRecord {
  std::string moment_key;
  std::string error;
};

struct TrainingCorpus {
  std::vector<DisturbedSet> sets;  // input order, skipped moments omitted
  std::vector<SkipRecord> skipped;
};

// One DisturbedSet per moment; per-moment failures are recorded, never fatal.
TrainingCorpus build_training_corpus(const ModelContext& ctx,
                                     std::span<const MomentRecord> moments,
                                     const PerturbConfig& cfg);

}  // namespace finecap
