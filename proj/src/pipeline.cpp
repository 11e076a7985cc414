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

#include "finecap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>
#include <set>

#include "finecap/analytics.hpp"
#include "finecap/dataset.hpp"
#include "finecap/digest.hpp"
#include "finecap/dynamics.hpp"
#include "finecap/errors.hpp"
#include "finecap/evaluator.hpp"
#include "finecap/io.hpp"
#include "finecap/keyframe.hpp"
#include "finecap/prompts.hpp"
#include "finecap/statics.hpp"
#include "finecap/worker_pool.hpp"

namespace finecap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kStageNames[] = {
    "keyframes", "caption-statics", "caption-dynamics", "perturb", "embed",
    "train-evaluator", "score", "select", "stats", "eval-metrics"};

constexpr const char* kManifest = "manifest.json";
constexpr const char* kKeyframes = "keyframes.jsonl";
constexpr const char* kStaticsRaw = "statics_raw.jsonl";
constexpr const char* kStaticsCandidates = "statics_candidates.jsonl";
constexpr const char* kDynamicsRaw = "dynamics_raw.jsonl";
constexpr const char* kDynamicsCandidates = "dynamics_candidates.jsonl";
constexpr const char* kDisturbed = "disturbed.jsonl";
constexpr const char* kPerturbSkipped = "perturb_skipped.jsonl";
constexpr const char* kEmbeddings = "embeddings.jsonl";
constexpr const char* kCheckpoint = "evaluator.ckpt";
constexpr const char* kLossTrace = "loss_trace.csv";
constexpr const char* kScored = "scored.jsonl";
constexpr const char* kFig = "fig.jsonl";
constexpr const char* kStats = "stats.json";
constexpr const char* kMetricsText = "metrics.txt";
constexpr const char* kMetricsJsonl = "metrics.jsonl";

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

const char* level_name(LogLevel l) {
  switch (l) {
    case LogLevel::kDebug: return "debug";
    case LogLevel::kInfo: return "info";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kError: return "error";
  }
  return "info";
}

std::string write_jsonl(const std::vector<json>& lines) {
  std::string out;
  for (const auto& j : lines) out += to_line(j) + "\n";
  return out;
}

json keyed(std::size_t index, const MomentRecord& m) {
  return {{"index", index}, {"moment_key", m.key()}};
}

// Per-moment stage output indexed like moments.jsonl.
std::vector<std::optional<json>> load_indexed(const fs::path& path,
                                              const std::vector<MomentRecord>& moments) {
  std::vector<std::optional<json>> out(moments.size());
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("index") || !j["index"].is_number_unsigned() ||
        !j.contains("moment_key") || !j["moment_key"].is_string()) {
      throw DatasetError(line, "index", "expected index and moment_key");
    }
    const auto i = j["index"].get<std::size_t>();
    if (i >= moments.size() || moments[i].key() != j["moment_key"].get<std::string>()) {
      throw IoError(path.string() + " line " + std::to_string(line) +
                    " does not match the moments file; re-run the upstream stage");
    }
    out[i] = j;
  });
  return out;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (j.contains(key)) {
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  }
  return out;
}

bool flag_set(const json& j, const char* key) { return j.contains(key) && j.at(key).get<bool>(); }

struct EmbeddingTable {
  std::map<std::string, EmbeddingVector> moments;
  std::map<std::string, EmbeddingVector> texts;
};

EmbeddingTable load_embeddings(const fs::path& path) {
  EmbeddingTable t;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    if (!j.contains("vector") || !j["vector"].is_array()) {
      throw DatasetError(line, "vector", "expected an array of numbers");
    }
    auto v = j["vector"].get<EmbeddingVector>();
    if (j.contains("moment")) {
      t.moments[j["moment"].get<std::string>()] = std::move(v);
    } else if (j.contains("text")) {
      t.texts[j["text"].get<std::string>()] = std::move(v);
    } else {
      throw DatasetError(line, "moment", "expected a moment or text key");
    }
  });
  return t;
}

json stats_json(const DatasetStats& s) {
  return {{"captions", s.captions}, {"skipped", s.skipped},     {"vocab_size", s.vocab_size},
          {"avg_words", s.avg_words}, {"avg_nouns", s.avg_nouns}, {"avg_verbs", s.avg_verbs},
          {"avg_adjs", s.avg_adjs}};
}

std::string digest_file(const fs::path& p) { return sha256_hex(read_file(p)); }

}  // namespace

std::string_view to_string(Stage stage) { return kStageNames[static_cast<int>(stage)]; }

std::optional<Stage> parse_stage(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(kStageNames)); ++i) {
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

const std::vector<Stage>& annotation_stages() {
  static const std::vector<Stage> stages = {
      Stage::kKeyframes, Stage::kCaptionStatics, Stage::kCaptionDynamics, Stage::kPerturb,
      Stage::kEmbed,     Stage::kTrainEvaluator, Stage::kScore,           Stage::kSelect};
  return stages;
}

std::string logfmt_value(std::string_view v) {
  const bool plain = !v.empty() && v.find_first_of(" \"=\t\n\r\\") == std::string_view::npos;
  if (plain) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

Logger::Logger(Sink sink, LogLevel min_level)
    : sink_(std::move(sink)), min_level_(min_level), mu_(std::make_shared<std::mutex>()) {}

Logger Logger::to_stderr(LogLevel min_level) {
  return Logger([](const std::string& line) { std::cerr << line << '\n'; }, min_level);
}

void Logger::log(LogLevel level, std::string_view stage, std::string_view moment,
                 std::string_view event, std::string_view msg,
                 const std::vector<Field>& fields) const {
  if (!sink_ || level < min_level_) return;
  std::string line = "ts=" + iso_now() + " level=" + level_name(level);
  if (!stage.empty()) line += " stage=" + logfmt_value(stage);
  if (!moment.empty()) line += " moment=" + logfmt_value(moment);
  line += " event=" + logfmt_value(event);
  for (const auto& [k, v] : fields) line += " " + k + "=" + logfmt_value(v);
  if (!msg.empty()) line += " msg=" + logfmt_value(msg);
  std::lock_guard lock(*mu_);
  sink_(line);
}

BackendSet make_backends(const Config& cfg) {
  BackendSet set;
  std::optional<ResponseCache> cache;
  if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);
  auto retry_for = [](const BackendConfig& b) {
    RetryPolicy r;
    r.max_retries = b.max_retries;
    r.initial_delay_s = b.backoff_initial_s;
    return r;
  };
  auto client = [&](Role role, const BackendConfig& b, const std::shared_ptr<ChatTransport>& t) {
    return std::make_shared<ChatClient>(role, t, cache, retry_for(b));
  };
  std::size_t text_dim = 0;
  if (cfg.use_mock) {
    auto rules = cfg.mock_rules.empty() ? builtin_mock_rules() : load_mock_rules(cfg.mock_rules);
    auto mock = std::make_shared<MockChatTransport>(std::move(rules));
    set.llm = client(Role::kLlm, cfg.llm, mock);
    set.image_lmm = client(Role::kImageLmm, cfg.image_lmm, mock);
    set.video_lmm = client(Role::kVideoLmm, cfg.video_lmm, mock);
    set.embedder = std::make_shared<MockEmbedder>(cfg.mock_embed_dim, cfg.seed);
    text_dim = cfg.mock_embed_dim;
  } else {
    const std::pair<const char*, const BackendConfig*> roles[] = {
        {"backends.llm", &cfg.llm},
        {"backends.image_lmm", &cfg.image_lmm},
        {"backends.video_lmm", &cfg.video_lmm},
        {"backends.embedder", &cfg.embedder}};
    for (const auto& [key, b] : roles) {
      if (b->endpoint.empty()) throw ConfigError(std::string(key) + ".endpoint", "required without --mock");
      if (b->model.empty()) throw ConfigError(std::string(key) + ".model", "required without --mock");
      if (auto err = check(*b)) throw ConfigError(key, *err);
    }
    set.llm = client(Role::kLlm, cfg.llm, std::make_shared<HttpChatTransport>(cfg.llm));
    set.image_lmm = client(Role::kImageLmm, cfg.image_lmm, std::make_shared<HttpChatTransport>(cfg.image_lmm));
    set.video_lmm = client(Role::kVideoLmm, cfg.video_lmm, std::make_shared<HttpChatTransport>(cfg.video_lmm));
    set.embedder = std::make_shared<HttpEmbedder>(cfg.embedder, cfg.embedder_dim, retry_for(cfg.embedder));
    text_dim = cfg.embedder_dim;
  }
  std::string kind = cfg.frame_embedder_kind;
  if (kind == "auto") kind = cfg.use_mock ? "mock" : "precomputed";
  if (kind == "mock") {
    if (text_dim == 0) {
      throw ConfigError("backends.embedder.dim", "must be set when frames use the mock embedder");
    }
    set.frame_embedder = std::make_shared<MockFrameEmbedder>(text_dim, cfg.seed);
  } else {
    if (cfg.frame_embedder_path.empty()) {
      throw ConfigError("backends.frame_embedder.path", "required for precomputed frame embeddings");
    }
    set.frame_embedder = std::make_shared<PrecomputedFrameEmbedder>(cfg.frame_embedder_path);
  }
  return set;
}

struct Pipeline::Impl {
  std::optional<BackendSet> backends;
  std::unique_ptr<ModelContext> ctx;
  std::optional<std::vector<MomentRecord>> moments;
};

Pipeline::Pipeline(Config cfg, RunOptions opts, Logger logger)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), log_(std::move(logger)),
      impl_(std::make_unique<Impl>()) {
  if (opts_.moments.empty()) opts_.moments = opts_.work_dir / "moments.jsonl";
  if (opts_.stats_input.empty()) opts_.stats_input = opts_.work_dir / kFig;
}

Pipeline::~Pipeline() = default;

void Pipeline::set_backends(BackendSet backends) {
  impl_->backends = std::move(backends);
  impl_->ctx.reset();
}

fs::path Pipeline::path_of(std::string_view file) const { return opts_.work_dir / file; }

namespace {

struct StagePlan {
  std::vector<std::pair<std::string, fs::path>> inputs;
  bool uses_frames = false;
  bool uses_models = false;
  std::vector<std::string> outputs;
  std::function<std::vector<SkipRecord>()> body;
};

std::vector<SkipRecord> collect_failures(const std::vector<MomentRecord>& moments,
                                         const std::vector<std::string>& errors) {
  std::vector<SkipRecord> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) out.push_back({moments[i].key(), errors[i]});
  }
  return out;
}

}  // namespace

StageReport Pipeline::run(Stage stage) {
  StageReport rep;
  rep.stage = stage;
  const std::string name(to_string(stage));
  const std::size_t workers = cfg_.workers_for(name);
  auto& impl = *impl_;

  auto moments = [&]() -> const std::vector<MomentRecord>& {
    if (!impl.moments) impl.moments = load_moments(opts_.moments);
    return *impl.moments;
  };
  auto ctx = [&]() -> const ModelContext& {
    if (!impl.ctx) {
      if (!impl.backends) impl.backends = make_backends(cfg_);
      auto c = std::make_unique<ModelContext>();
      c->backends = *impl.backends;
      if (!cfg_.prompt_templates.empty()) c->prompts = PromptTemplates::load(cfg_.prompt_templates);
      // Mock backends run at temperature 0; real ones use the per-role setting.
      c->llm_temperature = cfg_.use_mock ? 0.0 : cfg_.llm.temperature;
      c->image_lmm_temperature = cfg_.use_mock ? 0.0 : cfg_.image_lmm.temperature;
      c->video_lmm_temperature = cfg_.use_mock ? 0.0 : cfg_.video_lmm.temperature;
      c->seed = cfg_.seed;
      impl.ctx = std::move(c);
    }
    return *impl.ctx;
  };
  auto work = [&](const char* f) { return path_of(f); };
  auto write = [&](const char* f, std::string_view content) { write_file_atomic(work(f), content); };
  DirectoryFrameProvider provider(cfg_.frames_dir);

  StagePlan plan;
  try {
  switch (stage) {
    case Stage::kKeyframes:
      plan.inputs = {{"moments", opts_.moments}};
      plan.uses_frames = true;
      plan.outputs = {kKeyframes};
      plan.body = [&] {
        const auto& ms = moments();
        std::vector<json> lines(ms.size());
        std::vector<std::string> errors(ms.size());
        parallel_for(ms.size(), workers, [&](std::size_t i) {
          lines[i] = keyed(i, ms[i]);
          try {
            const FrameSequence seq = provider.frames_for(ms[i]);
            if (seq.empty()) throw IoError("no frames under " + (cfg_.frames_dir / ms[i].video_id).string());
            const auto res = select_keyframes(seq, cfg_.segmentation);
            json segs = json::array();
            for (const auto& s : res.segments) {
              segs.push_back({{"start", s.start}, {"end", s.end}, {"timestamp", s.key_frame.timestamp}});
            }
            lines[i]["segments"] = segs;
            lines[i]["threshold"] = res.threshold;
            lines[i]["iterations"] = res.iterations;
            lines[i]["capped"] = res.capped;
          } catch (const std::exception& e) {
            errors[i] = e.what();
            lines[i]["error"] = errors[i];
          }
        });
        write(kKeyframes, write_jsonl(lines));
        return collect_failures(ms, errors);
      };
      break;

    case Stage::kCaptionStatics:
      plan.inputs = {{"moments", opts_.moments}, {kKeyframes, work(kKeyframes)}};
      plan.uses_frames = true;
      plan.uses_models = true;
      plan.outputs = {kStaticsRaw, kStaticsCandidates};
      plan.body = [&] {
        const auto& ms = moments();
        const auto kf = load_indexed(work(kKeyframes), ms);
        const ModelContext& c = ctx();
        std::vector<json> raw(ms.size()), cands(ms.size());
        std::vector<std::string> errors(ms.size());
        parallel_for(ms.size(), workers, [&](std::size_t i) {
          raw[i] = keyed(i, ms[i]);
          cands[i] = keyed(i, ms[i]);
          try {
            if (!kf[i] || kf[i]->contains("error")) throw Error(ErrorCode::kDataset, "no key frames for this moment");
            const FrameSequence seq = provider.frames_for(ms[i]);
            std::vector<FrameRef> keyframes;
            for (const auto& s : kf[i]->at("segments")) {
              const double ts = s.at("timestamp").get<double>();
              auto it = std::find_if(seq.frames.begin(), seq.frames.end(),
                                     [&](const FrameRef& f) { return std::abs(f.timestamp - ts) < 1e-9; });
              if (it == seq.frames.end()) throw IoError("key frame at " + std::to_string(ts) + "s is missing");
              keyframes.push_back(*it);
            }
            const auto res = caption_statics(c, ms[i].q, keyframes, cfg_.n_statics);
            json descs = json::array();
            for (const auto& d : res.descriptions) {
              descs.push_back({{"timestamp", d.timestamp}, {"foreground", d.foreground},
                               {"background", d.background}, {"full", d.full}});
            }
            raw[i]["descriptions"] = descs;
            cands[i]["candidates"] = res.candidates.items;
            cands[i]["undercount"] = res.candidates.undercount;
          } catch (const std::exception& e) {
            errors[i] = e.what();
            raw[i]["error"] = errors[i];
            cands[i]["error"] = errors[i];
          }
        });
        write(kStaticsRaw, write_jsonl(raw));
        write(kStaticsCandidates, write_jsonl(cands));
        return collect_failures(ms, errors);
      };
      break;

    case Stage::kCaptionDynamics:
      plan.inputs = {{"moments", opts_.moments}};
      plan.uses_frames = true;
      plan.uses_models = true;
      plan.outputs = {kDynamicsRaw, kDynamicsCandidates};
      plan.body = [&] {
        const auto& ms = moments();
        const ModelContext& c = ctx();
        std::vector<json> raw(ms.size()), cands(ms.size());
        std::vector<std::string> errors(ms.size());
        parallel_for(ms.size(), workers, [&](std::size_t i) {
          raw[i] = keyed(i, ms[i]);
          cands[i] = keyed(i, ms[i]);
          try {
            const FrameSequence seq = provider.frames_for(ms[i]);
            if (seq.empty()) throw IoError("no frames under " + (cfg_.frames_dir / ms[i].video_id).string());
            const FrameSequence sampled = sample_frames(seq, cfg_.frame_policy);
            const auto questions = generate_questions(c, ms[i].q, cfg_.n_questions);
            const auto bundle = answer_and_describe(c, sampled, questions.items, ms[i].q);
            const auto list = rewrite_dynamics(c, bundle, ms[i].q, cfg_.n_dynamics);
            json pairs = json::array();
            for (const auto& p : bundle.pairs) pairs.push_back({{"question", p.question}, {"answer", p.answer}});
            raw[i]["pairs"] = pairs;
            raw[i]["description"] = bundle.description;
            raw[i]["frames"] = sampled.frames.size();
            raw[i]["questions_undercount"] = questions.undercount;
            cands[i]["candidates"] = list.items;
            cands[i]["undercount"] = list.undercount;
            cands[i]["questions_undercount"] = questions.undercount;
          } catch (const RefusalError& e) {
            errors[i] = std::string("refused: ") + e.what();
            raw[i]["error"] = errors[i];
            cands[i]["error"] = errors[i];
            cands[i]["refused"] = true;
          } catch (const std::exception& e) {
            errors[i] = e.what();
            raw[i]["error"] = errors[i];
            cands[i]["error"] = errors[i];
          }
        });
        write(kDynamicsRaw, write_jsonl(raw));
        write(kDynamicsCandidates, write_jsonl(cands));
        return collect_failures(ms, errors);
      };
      break;

    case Stage::kPerturb:
      plan.inputs = {{"moments", opts_.moments}};
      plan.uses_models = true;
      plan.outputs = {kDisturbed, kPerturbSkipped};
      plan.body = [&] {
        std::vector<MomentRecord> train;
        for (const auto& m : moments()) {
          if (m.split == Split::kTrain) train.push_back(m);
        }
        if (train.empty()) throw InvalidArgument("no train-split moments to build evaluator data from");
        PerturbConfig pc = cfg_.perturb;
        pc.workers = workers;
        const auto corpus = build_training_corpus(ctx(), train, pc);
        save_dataset(std::span<const DisturbedSet>(corpus.sets), work(kDisturbed));
        std::vector<json> skipped;
        for (const auto& s : corpus.skipped) skipped.push_back({{"moment_key", s.moment_key}, {"error", s.error}});
        write(kPerturbSkipped, write_jsonl(skipped));
        return corpus.skipped;
      };
      break;

    case Stage::kEmbed:
      plan.inputs = {{"moments", opts_.moments},
                     {kDisturbed, work(kDisturbed)},
                     {kStaticsCandidates, work(kStaticsCandidates)},
                     {kDynamicsCandidates, work(kDynamicsCandidates)}};
      plan.uses_frames = true;
      plan.uses_models = true;
      plan.outputs = {kEmbeddings};
      plan.body = [&] {
        const auto& ms = moments();
        const auto disturbed = load_disturbed(work(kDisturbed));
        const auto st = load_indexed(work(kStaticsCandidates), ms);
        const auto dy = load_indexed(work(kDynamicsCandidates), ms);
        const BackendSet& be = ctx().backends;
        if (be.frame_embedder->dim() != be.embedder->dim() && be.embedder->dim() != 0) {
          throw ConfigError("backends.frame_embedder",
                            "frame embedding dimension " + std::to_string(be.frame_embedder->dim()) +
                                " differs from text embedding dimension " + std::to_string(be.embedder->dim()));
        }

        std::map<std::string, MomentRecord> by_key;
        for (const auto& m : ms) by_key.emplace(m.key(), m);
        for (const auto& d : disturbed) by_key.emplace(d.source.key(), d.source);
        std::set<std::string> text_set;
        for (const auto& d : disturbed) {
          text_set.insert({d.source.q, d.best_pos, d.best_static_neg, d.best_dynamic_neg});
        }
        for (const auto* list : {&st, &dy}) {
          for (const auto& line : *list) {
            if (!line) continue;
            for (auto& t : string_list(*line, "candidates")) text_set.insert(std::move(t));
          }
        }

        std::vector<MomentRecord> targets;
        for (auto& [k, m] : by_key) targets.push_back(m);
        std::vector<std::optional<EmbeddingVector>> videos(targets.size());
        std::vector<std::string> errors(targets.size());
        parallel_for(targets.size(), workers, [&](std::size_t i) {
          try {
            const FrameSequence seq = provider.frames_for(targets[i]);
            if (seq.empty()) throw IoError("no frames under " + (cfg_.frames_dir / targets[i].video_id).string());
            const FrameSequence pool = sample_uniform(seq, cfg_.trainer.pool_frames);
            std::vector<EmbeddingVector> frames;
            for (const auto& f : pool.frames) frames.push_back(be.frame_embedder->embed_frame(f));
            videos[i] = pool_moment_embedding(frames);
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        });

        const std::vector<std::string> texts(text_set.begin(), text_set.end());
        constexpr std::size_t kChunk = 64;
        const std::size_t chunks = (texts.size() + kChunk - 1) / kChunk;
        std::vector<std::vector<EmbeddingVector>> text_vecs(chunks);
        parallel_for(chunks, workers, [&](std::size_t c) {
          const std::size_t begin = c * kChunk, end = std::min(texts.size(), begin + kChunk);
          text_vecs[c] = be.embedder->embed(std::span<const std::string>(texts).subspan(begin, end - begin));
        });

        std::vector<json> lines;
        for (std::size_t i = 0; i < targets.size(); ++i) {
          if (videos[i]) lines.push_back({{"moment", targets[i].key()}, {"vector", *videos[i]}});
        }
        for (std::size_t c = 0; c < chunks; ++c) {
          for (std::size_t k = 0; k < text_vecs[c].size(); ++k) {
            lines.push_back({{"text", texts[c * kChunk + k]}, {"vector", text_vecs[c][k]}});
          }
        }
        write(kEmbeddings, write_jsonl(lines));
        return collect_failures(targets, errors);
      };
      break;

    case Stage::kTrainEvaluator:
      plan.inputs = {{kDisturbed, work(kDisturbed)}, {kEmbeddings, work(kEmbeddings)}};
      plan.outputs = {kCheckpoint, kLossTrace};
      plan.body = [&] {
        const auto disturbed = load_disturbed(work(kDisturbed));
        const auto table = load_embeddings(work(kEmbeddings));
        std::vector<TrainingExample> examples;
        std::vector<SkipRecord> failures;
        for (const auto& d : disturbed) {
          auto text = [&](const std::string& t) -> const EmbeddingVector* {
            auto it = table.texts.find(t);
            return it == table.texts.end() ? nullptr : &it->second;
          };
          auto vid = table.moments.find(d.source.key());
          const EmbeddingVector* parts[] = {text(d.source.q), text(d.best_pos), text(d.best_static_neg),
                                            text(d.best_dynamic_neg)};
          if (vid == table.moments.end() ||
              std::any_of(std::begin(parts), std::end(parts), [](auto* p) { return p == nullptr; })) {
            failures.push_back({d.source.key(), "missing embedding; excluded from training"});
            continue;
          }
          examples.push_back({vid->second, *parts[0], *parts[1], *parts[2], *parts[3]});
        }
        if (examples.empty()) throw InvalidArgument("no usable training examples");
        const auto result = train(examples, cfg_.trainer);
        for (const auto& e : result.trace) {
          log_.log(LogLevel::kInfo, name, "", "epoch", "",
                   {{"epoch", std::to_string(e.epoch)},
                    {"l_c", std::to_string(e.contrastive)},
                    {"l_m", std::to_string(e.matching)},
                    {"l", std::to_string(e.total)}});
        }
        save_checkpoint(result.model, cfg_.trainer, work(kCheckpoint));
        write(kLossTrace, loss_trace_csv(result.trace));
        return failures;
      };
      break;

    case Stage::kScore:
      plan.inputs = {{"moments", opts_.moments},
                     {kStaticsCandidates, work(kStaticsCandidates)},
                     {kDynamicsCandidates, work(kDynamicsCandidates)},
                     {kEmbeddings, work(kEmbeddings)},
                     {kCheckpoint, work(kCheckpoint)}};
      plan.outputs = {kScored};
      plan.body = [&] {
        const auto& ms = moments();
        const auto st = load_indexed(work(kStaticsCandidates), ms);
        const auto dy = load_indexed(work(kDynamicsCandidates), ms);
        const auto table = load_embeddings(work(kEmbeddings));
        const EvaluatorModel model = load_checkpoint(work(kCheckpoint));
        std::vector<AnnotatedMoment> out(ms.size());
        std::vector<std::string> errors(ms.size());
        parallel_for(ms.size(), workers, [&](std::size_t i) {
          AnnotatedMoment& a = out[i];
          a.moment = ms[i];
          auto take = [&](const std::optional<json>& line, CaptionKind kind, std::string_view failed,
                          std::string_view under, std::vector<CaptionCandidate>& dst) {
            if (!line || line->contains("error")) {
              a.add_flag(std::string(failed));
              return;
            }
            if (flag_set(*line, "undercount")) a.add_flag(std::string(under));
            if (flag_set(*line, "questions_undercount")) a.add_flag(std::string(flags::kQuestionsUndercount));
            for (auto& t : string_list(*line, "candidates")) dst.push_back({std::move(t), kind, std::nullopt, false});
          };
          take(st[i], CaptionKind::kStatic, flags::kStaticsFailed, flags::kStaticsUndercount, a.statics);
          take(dy[i], CaptionKind::kDynamic, flags::kDynamicsFailed, flags::kDynamicsUndercount, a.dynamics);
          try {
            auto vid = table.moments.find(ms[i].key());
            if (vid == table.moments.end()) throw Error(ErrorCode::kDataset, "no moment embedding");
            const std::vector<EmbeddingVector> frames = {vid->second};
            for (auto* list : {&a.statics, &a.dynamics}) {
              for (auto& c : *list) {
                auto t = table.texts.find(c.text);
                if (t == table.texts.end()) throw Error(ErrorCode::kDataset, "no embedding for candidate '" + c.text + "'");
                c.score = score(model, frames, t->second);
              }
            }
          } catch (const std::exception& e) {
            errors[i] = e.what();
            for (auto* list : {&a.statics, &a.dynamics}) {
              for (auto& c : *list) c.score.reset();
            }
          }
        });
        save_dataset(std::span<const AnnotatedMoment>(out), work(kScored));
        return collect_failures(ms, errors);
      };
      break;

    case Stage::kSelect:
      plan.inputs = {{kScored, work(kScored)}};
      plan.outputs = {kFig};
      plan.body = [&] {
        auto scored = load_fig(work(kScored));
        std::vector<SkipRecord> failures;
        for (auto& a : scored) {
          const bool all_scored =
              std::all_of(a.statics.begin(), a.statics.end(), [](auto& c) { return c.score.has_value(); }) &&
              std::all_of(a.dynamics.begin(), a.dynamics.end(), [](auto& c) { return c.score.has_value(); });
          if (!all_scored) {
            a.add_flag(std::string(flags::kAnnotationFailed));
            failures.push_back({a.moment.key(), "unscored candidates; nothing selected"});
            continue;
          }
          a = select_and_filter(std::move(a), cfg_.filter_threshold);
          if (!a.selected) failures.push_back({a.moment.key(), "no caption candidates"});
        }
        save_dataset(std::span<const AnnotatedMoment>(scored), work(kFig));
        return failures;
      };
      break;

    case Stage::kStats:
      plan.inputs = {{"fig", opts_.stats_input}};
      if (!opts_.lexicon.empty()) plan.inputs.push_back({"lexicon", opts_.lexicon});
      plan.outputs = {kStats};
      plan.body = [&] {
        const auto fig = load_fig(opts_.stats_input);
        const LexiconTagger tagger = opts_.lexicon.empty() ? LexiconTagger::builtin() : LexiconTagger::load(opts_.lexicon);
        std::vector<std::string> coarse, fine;
        std::vector<CaptionMoment> coarse_pairs, fine_pairs;
        for (const auto& a : fig) {
          coarse.push_back(a.moment.q);
          coarse_pairs.push_back({a.moment.q, a.moment.key()});
          if (a.selected) {
            if (const auto* c = a.find(*a.selected)) {
              fine.push_back(c->text);
              fine_pairs.push_back({c->text, a.moment.key()});
            }
          }
        }
        if (coarse.empty()) throw InvalidArgument("stats input has no moments");
        auto warn = [&](const std::string& m) { log_.log(LogLevel::kWarn, name, "", "tagger_skip", m); };
        const auto mm_c = count_many_to_many(coarse_pairs);
        const auto mm_f = count_many_to_many(fine_pairs);
        json out = {
            {"coarse", stats_json(compute_stats(coarse, tagger, warn))},
            {"fine", fine.empty() ? json(nullptr) : stats_json(compute_stats(fine, tagger, warn))},
            {"many_to_many",
             {{"definition", kManyToManyDefinition},
              {"coarse", {{"classes", mm_c.num_classes}, {"instances", mm_c.num_instances}}},
              {"fine", {{"classes", mm_f.num_classes}, {"instances", mm_f.num_instances}}}}}};
        write(kStats, out.dump(2) + "\n");
        return std::vector<SkipRecord>{};
      };
      break;

    case Stage::kEvalMetrics:
      if (opts_.predictions.empty()) throw ConfigError("--predictions", "required for eval-metrics");
      if (opts_.ground_truth.empty()) throw ConfigError("--ground-truth", "required for eval-metrics");
      plan.inputs = {{"predictions", opts_.predictions}, {"ground_truth", opts_.ground_truth}};
      plan.outputs = {kMetricsText, kMetricsJsonl};
      plan.body = [&] {
        const auto preds = load_predictions(opts_.predictions);
        const auto gt = load_ground_truth(opts_.ground_truth);
        const RetrievalTask tasks[] = {RetrievalTask::kVcmr, RetrievalTask::kSvmr, RetrievalTask::kVr};
        const double ms[] = {0.5, 0.7};
        const int ks[] = {1, 5, 10, 100};
        auto warn = [&](const std::string& m) { log_.log(LogLevel::kWarn, name, "", "missing_query", m); };
        const auto rows = recall_table(preds, gt, tasks, ms, ks, warn);
        write(kMetricsText, render_recall_text(rows));
        write(kMetricsJsonl, render_recall_jsonl(rows));
        return std::vector<SkipRecord>{};
      };
      break;
  }

    fs::create_directories(opts_.work_dir);
    json inputs = json::object();
    for (const auto& [label, path] : plan.inputs) {
      if (!fs::exists(path)) throw IoError("missing input file: " + path.string());
      inputs[label] = digest_file(path);
    }
    if (plan.uses_frames) {
      std::set<std::string> videos;
      for (const auto& m : moments()) videos.insert(m.video_id);
      std::string listing;
      for (const auto& v : videos) {
        const fs::path dir = cfg_.frames_dir / v;
        std::error_code ec;
        if (!fs::is_directory(dir, ec)) {
          listing += v + "/<missing>\n";
          continue;
        }
        std::vector<std::string> entries;
        for (const auto& e : fs::directory_iterator(dir)) {
          if (e.is_regular_file()) entries.push_back(v + "/" + e.path().filename().string() + " " + std::to_string(e.file_size()));
        }
        std::sort(entries.begin(), entries.end());
        for (auto& e : entries) listing += e + "\n";
      }
      inputs["frames"] = sha256_hex(listing);
    }
    if (plan.uses_models) {
      if (!cfg_.prompt_templates.empty()) inputs["prompt_templates"] = digest_file(cfg_.prompt_templates);
      if (cfg_.use_mock && !cfg_.mock_rules.empty()) inputs["mock_rules"] = digest_file(cfg_.mock_rules);
    }
    const std::string cfg_digest = config_digest(cfg_);

    json manifest = json::object();
    const fs::path manifest_path = path_of(kManifest);
    if (fs::exists(manifest_path)) {
      manifest = json::parse(read_file(manifest_path), nullptr, false);
      if (manifest.is_discarded() || !manifest.is_object()) {
        log_.log(LogLevel::kWarn, name, "", "manifest_unreadable", manifest_path.string());
        manifest = json::object();
      }
    }
    if (!opts_.force && manifest.contains("stages") && manifest["stages"].contains(name)) {
      const json& entry = manifest["stages"][name];
      bool same = entry.value("config_digest", "") == cfg_digest && entry.value("inputs", json()) == inputs;
      if (same) {
        for (const auto& out : plan.outputs) {
          const fs::path p = path_of(out);
          const auto recorded = entry.value("outputs", json::object());
          if (!fs::exists(p) || !recorded.contains(out) || recorded[out] != digest_file(p)) {
            same = false;
            break;
          }
        }
      }
      if (same) {
        rep.manifest_match = true;
        rep.exit_code = entry.value("exit_code", kExitOk);
        for (const auto& f : entry.value("failures", json::array())) {
          rep.failures.push_back({f.value("moment_key", ""), f.value("error", "")});
        }
        log_.log(LogLevel::kInfo, name, "", "skip", "manifest match");
        return rep;
      }
    }

    log_.log(LogLevel::kInfo, name, "", "start", "", {{"workers", std::to_string(workers)}});
    const auto t0 = std::chrono::steady_clock::now();
    rep.failures = plan.body();
    for (const auto& f : rep.failures) log_.log(LogLevel::kWarn, name, f.moment_key, "moment_failed", f.error);
    rep.exit_code = rep.failures.empty() ? kExitOk : kExitPartial;

    json outputs = json::object();
    for (const auto& out : plan.outputs) outputs[out] = digest_file(path_of(out));
    json failures = json::array();
    for (const auto& f : rep.failures) failures.push_back({{"moment_key", f.moment_key}, {"error", f.error}});
    manifest["version"] = 1;
    manifest["stages"][name] = {{"config_digest", cfg_digest}, {"inputs", inputs},
                                {"outputs", outputs},          {"failures", failures},
                                {"exit_code", rep.exit_code}};
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char elapsed[32];
    std::snprintf(elapsed, sizeof(elapsed), "%.3f", secs);
    log_.log(LogLevel::kInfo, name, "", "done", "",
             {{"failures", std::to_string(rep.failures.size())}, {"seconds", elapsed}});
  } catch (const Error& e) {
    rep.exit_code = kExitError;
    rep.error = e.what();
    rep.error_code = e.code();
    log_.log(LogLevel::kError, name, "", "failed", rep.error);
  } catch (const std::exception& e) {
    rep.exit_code = kExitError;
    rep.error = e.what();
    log_.log(LogLevel::kError, name, "", "failed", rep.error);
  }
  return rep;
}

StageReport Pipeline::run_all() {
  StageReport worst;
  worst.stage = annotation_stages().front();
  for (Stage s : annotation_stages()) {
    StageReport r = run(s);
    worst.failures.insert(worst.failures.end(), r.failures.begin(), r.failures.end());
    if (r.exit_code > worst.exit_code) {
      worst.exit_code = r.exit_code;
      worst.stage = s;
      worst.error = r.error;
      worst.error_code = r.error_code;
    }
    if (r.exit_code == kExitError) break;
  }
  return worst;
}

}  // namespace finecap
