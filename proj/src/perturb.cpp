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

#include "finecap/perturb.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include "finecap/errors.hpp"
#include "finecap/text.hpp"
#include "finecap/worker_pool.hpp"

namespace finecap {

namespace {

void add_flag(std::vector<std::string>& flags, std::string_view flag) {
  auto it = std::lower_bound(flags.begin(), flags.end(), flag);
  if (it == flags.end() || *it != flag) flags.insert(it, std::string(flag));
}

std::size_t drop_copies_of(std::vector<std::string>& negs, const std::string& q) {
  const std::string nq = normalize_caption(q);
  const auto before = negs.size();
  std::erase_if(negs, [&](const std::string& s) { return normalize_caption(s) == nq; });
  return before - negs.size();
}

}  // namespace

DisturbedCandidates generate_disturbed(const ModelContext& ctx, const std::string& q,
                                       std::size_t n_pos, std::size_t n_neg, bool single_call) {
  if (trim(q).empty()) throw InvalidArgument("coarse caption must be non-empty");
  if (n_pos < 1 || n_neg < 1) throw InvalidArgument("N_pos and N_neg must be >= 1");
  DisturbedCandidates out;
  bool pos_under = false, s_under = false, d_under = false;
  if (single_call) {
    ChatRequest req = ctx.request(
        Role::kLlm, ctx.prompts.render("disturb_all", {{"q", q},
                                                       {"n_pos", std::to_string(n_pos)},
                                                       {"n_neg", std::to_string(n_neg)}}));
    auto parse = [&](const std::string& text) {
      const auto sections = parse_labeled_sections(text, {"POSITIVE", "STATIC", "DYNAMIC"});
      auto list = [&](const char* k) {
        auto it = sections.find(k);
        return it == sections.end() ? std::vector<std::string>{} : parse_numbered_list(it->second);
      };
      return std::array<std::vector<std::string>, 3>{list("POSITIVE"), list("STATIC"), list("DYNAMIC")};
    };
    auto lists = parse(ctx.backends.chat(Role::kLlm, req).text);
    if (lists[0].size() < n_pos || lists[1].size() < n_neg || lists[2].size() < n_neg) {
      req.user += ctx.prompts.reprompt_suffix();
      auto again = parse(ctx.backends.chat(Role::kLlm, req).text);
      for (int k = 0; k < 3; ++k) {
        if (again[k].size() > lists[k].size()) lists[k] = std::move(again[k]);
      }
    }
    lists[0].resize(std::min(lists[0].size(), n_pos));
    lists[1].resize(std::min(lists[1].size(), n_neg));
    lists[2].resize(std::min(lists[2].size(), n_neg));
    pos_under = lists[0].size() < n_pos;
    s_under = lists[1].size() < n_neg;
    d_under = lists[2].size() < n_neg;
    out.positives = std::move(lists[0]);
    out.static_negs = std::move(lists[1]);
    out.dynamic_negs = std::move(lists[2]);
  } else {
    auto pos = ask_for_list(ctx, Role::kLlm, "disturb_positive", {{"q", q}, {"n", std::to_string(n_pos)}}, n_pos);
    auto sn = ask_for_list(ctx, Role::kLlm, "disturb_static", {{"q", q}, {"n", std::to_string(n_neg)}}, n_neg);
    auto dn = ask_for_list(ctx, Role::kLlm, "disturb_dynamic", {{"q", q}, {"n", std::to_string(n_neg)}}, n_neg);
    pos_under = pos.undercount;
    s_under = sn.undercount;
    d_under = dn.undercount;
    out.positives = std::move(pos.items);
    out.static_negs = std::move(sn.items);
    out.dynamic_negs = std::move(dn.items);
  }
  if (pos_under) add_flag(out.flags, flags::kPositivesUndercount);
  if (s_under) add_flag(out.flags, flags::kStaticNegsUndercount);
  if (d_under) add_flag(out.flags, flags::kDynamicNegsUndercount);
  if (drop_copies_of(out.static_negs, q) + drop_copies_of(out.dynamic_negs, q) > 0) {
    add_flag(out.flags, flags::kNegativeDuplicateDropped);
  }
  return out;
}

std::size_t argmin_first(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

BestIndices select_by_distance(std::span<const double> pos_dist,
                               std::span<const double> static_dist,
                               std::span<const double> dynamic_dist) {
  return {argmin_first(pos_dist), argmax_first(static_dist), argmax_first(dynamic_dist)};
}

BestCaptions select_best(const std::string& q, std::span<const std::string> positives,
                         std::span<const std::string> static_negs,
                         std::span<const std::string> dynamic_negs, Embedder& embedder) {
  if (positives.empty()) throw InvalidArgument("no positive candidates");
  if (static_negs.empty()) throw InvalidArgument("no statics-disturbed negatives");
  if (dynamic_negs.empty()) throw InvalidArgument("no dynamics-disturbed negatives");
  std::vector<std::string> texts = {q};
  texts.insert(texts.end(), positives.begin(), positives.end());
  texts.insert(texts.end(), static_negs.begin(), static_negs.end());
  texts.insert(texts.end(), dynamic_negs.begin(), dynamic_negs.end());
  const auto vecs = embedder.embed(texts);
  auto distances = [&](std::size_t offset, std::size_t count) {
    std::vector<double> d;
    for (std::size_t i = 0; i < count; ++i) d.push_back(semantic_distance(vecs[offset + i], vecs[0]));
    return d;
  };
  const auto dp = distances(1, positives.size());
  const auto ds = distances(1 + positives.size(), static_negs.size());
  const auto dd = distances(1 + positives.size() + static_negs.size(), dynamic_negs.size());
  BestCaptions out;
  out.indices = select_by_distance(dp, ds, dd);
  out.positive = positives[out.indices.positive];
  out.static_neg = static_negs[out.indices.static_neg];
  out.dynamic_neg = dynamic_negs[out.indices.dynamic_neg];
  return out;
}

TrainingCorpus build_training_corpus(const ModelContext& ctx,
                                     std::span<const MomentRecord> moments,
                                     const PerturbConfig& cfg) {
  if (!ctx.backends.embedder) throw InvalidArgument("build_training_corpus needs an embedder");
  std::vector<std::optional<DisturbedSet>> sets(moments.size());
  std::vector<std::string> errors(moments.size());
  parallel_for(moments.size(), cfg.workers, [&](std::size_t i) {
    const MomentRecord& m = moments[i];
    try {
      auto cands = generate_disturbed(ctx, m.q, cfg.n_pos, cfg.n_neg, cfg.single_call);
      auto best = select_best(m.q, cands.positives, cands.static_negs, cands.dynamic_negs,
                              *ctx.backends.embedder);
      DisturbedSet d;
      d.source = m;
      d.positives = std::move(cands.positives);
      d.static_negs = std::move(cands.static_negs);
      d.dynamic_negs = std::move(cands.dynamic_negs);
      d.best_pos = std::move(best.positive);
      d.best_static_neg = std::move(best.static_neg);
      d.best_dynamic_neg = std::move(best.dynamic_neg);
      d.flags = std::move(cands.flags);
      sets[i] = std::move(d);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  TrainingCorpus out;
  for (std::size_t i = 0; i < moments.size(); ++i) {
    if (sets[i]) {
      out.sets.push_back(std::move(*sets[i]));
    } else {
      out.skipped.push_back({moments[i].key(), errors[i]});
    }
  }
  return out;
}

}  // namespace finecap
