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
#include <array>
#include <cmath>
#include <numbers>

#include "finecap/backends.hpp"
#include "finecap/dataset.hpp"
#include "finecap/digest.hpp"
#include "finecap/text.hpp"

namespace finecap {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

EmbeddingVector normalized(EmbeddingVector v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a zero or non-finite vector");
  for (double& x : v) x /= n;
  return v;
}

double semantic_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("semantic_distance of a zero vector");
  const double cos = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return 1.0 - cos;
}

std::uint64_t GaussianStream::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double GaussianStream::uniform() {
  // (0, 1], never zero so log() is finite.
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) {
  for (const auto& t : texts) {
    if (trim(t).empty()) throw InvalidArgument("cannot embed an empty text");
  }
  ++calls_;
  texts_ += texts.size();
  auto raw = embed_raw(texts);
  if (raw.size() != texts.size()) {
    throw BackendError(BackendFailure::kProtocol, "embedder returned wrong vector count", 1);
  }
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (auto& v : raw) {
    if (v.size() != dim()) {
      throw BackendError(BackendFailure::kProtocol,
                         "embedding dimension mismatch: got " + std::to_string(v.size()) +
                             ", configured " + std::to_string(dim()),
                         1);
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw NumericError("embedder returned a non-finite value");
    }
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

MockEmbedder::MockEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::vector<EmbeddingVector> MockEmbedder::embed_raw(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  for (const auto& text : texts) {
    EmbeddingVector v(dim_, 0.0);
    auto tokens = tokenize(text);
    if (tokens.empty()) tokens.push_back(text);
    for (const auto& tok : tokens) {
      GaussianStream g(sha256_u64(tok + "|" + std::to_string(seed_)));
      for (double& x : v) x += g.next();
    }
    out.push_back(std::move(v));
  }
  return out;
}

MockFrameEmbedder::MockFrameEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim) {
  if (dim_ == 0) throw InvalidArgument("embedding dimension must be positive");
  GaussianStream g(sha256_u64("frame-projection|" + std::to_string(seed)));
  projection_.resize(dim_ * 48);
  for (double& x : projection_) x = g.next();
}

EmbeddingVector MockFrameEmbedder::embed_frame(const FrameRef& frame) const {
  const auto img = frame.decode();
  if (img->empty()) throw InvalidArgument("empty frame");
  std::array<double, 48> features{};
  std::array<double, 16> counts{};
  for (int y = 0; y < img->height; ++y) {
    const int gy = y * 4 / img->height;
    for (int x = 0; x < img->width; ++x) {
      const int cell = gy * 4 + x * 4 / img->width;
      counts[cell] += 1.0;
      for (int c = 0; c < 3; ++c) features[cell * 3 + c] += img->at(x, y, c);
    }
  }
  for (int cell = 0; cell < 16; ++cell) {
    for (int c = 0; c < 3; ++c) {
      double& f = features[cell * 3 + c];
      f = counts[cell] > 0 ? f / (255.0 * counts[cell]) - 0.5 : 0.0;
    }
  }
  EmbeddingVector v(dim_, 0.0);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t k = 0; k < 48; ++k) v[r] += projection_[r * 48 + k] * features[k];
  }
  return normalized(std::move(v));
}

PrecomputedFrameEmbedder::PrecomputedFrameEmbedder(const std::filesystem::path& path) {
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    if (!j.contains("frame") || !j.at("frame").is_string()) {
      throw DatasetError(line, "frame", "expected string");
    }
    if (!j.contains("vector") || !j.at("vector").is_array()) {
      throw DatasetError(line, "vector", "expected array");
    }
    auto v = j.at("vector").get<EmbeddingVector>();
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) throw DatasetError(line, "vector", "inconsistent dimension");
    try {
      vectors_[j.at("frame").get<std::string>()] = normalized(std::move(v));
    } catch (const NumericError& e) {
      throw DatasetError(line, "vector", e.what());
    }
  });
  if (dim_ == 0) throw DatasetError(0, "<file>", "no frame embeddings in " + path.string());
}

EmbeddingVector PrecomputedFrameEmbedder::embed_frame(const FrameRef& frame) const {
  const std::string key =
      frame.path.parent_path().filename().string() + "/" + frame.path.stem().string();
  auto it = vectors_.find(key);
  if (it == vectors_.end()) throw InvalidArgument("no precomputed embedding for frame " + key);
  return it->second;
}

}  // namespace finecap
