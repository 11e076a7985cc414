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

#include "finecap/dataset.hpp"

#include <algorithm>
#include <string>

#include "finecap/errors.hpp"
#include "finecap/io.hpp"

namespace finecap {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& detail) {
  throw DatasetError(0, field, detail);
}

std::string join(const std::string& prefix, const char* name) {
  return prefix.empty() ? std::string(name) : prefix + "." + name;
}

const json& field(const json& j, const char* name, const std::string& prefix) {
  if (!j.is_object()) fail(prefix.empty() ? "<record>" : prefix, "expected object");
  auto it = j.find(name);
  if (it == j.end()) fail(join(prefix, name), "missing field");
  return *it;
}

std::string get_string(const json& j, const char* name,
                       const std::string& prefix = "") {
  const json& v = field(j, name, prefix);
  if (!v.is_string()) fail(join(prefix, name), "expected string");
  return v.get<std::string>();
}

double get_number(const json& j, const char* name,
                  const std::string& prefix = "") {
  const json& v = field(j, name, prefix);
  if (!v.is_number()) fail(join(prefix, name), "expected number");
  return v.get<double>();
}

std::vector<std::string> get_strings(const json& j, const char* name,
                                     const std::string& prefix = "") {
  const json& v = field(j, name, prefix);
  if (!v.is_array()) fail(join(prefix, name), "expected array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      fail(join(prefix, name) + "[" + std::to_string(i) + "]", "expected string");
    }
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::vector<std::string> get_flags(const json& j, const std::string& prefix = "") {
  if (!j.contains("flags")) return {};
  auto out = get_strings(j, "flags", prefix);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MomentRecord moment_fields(const json& j, const std::string& prefix) {
  MomentRecord m;
  m.video_id = get_string(j, "video_id", prefix);
  m.t_s = get_number(j, "t_s", prefix);
  m.t_e = get_number(j, "t_e", prefix);
  m.q = get_string(j, "q", prefix);
  const std::string split = get_string(j, "split", prefix);
  auto parsed = parse_split(split);
  if (!parsed) fail(join(prefix, "split"), "unknown split '" + split + "'");
  m.split = *parsed;
  if (auto err = check(m)) fail(prefix.empty() ? "<record>" : prefix, *err);
  return m;
}

CaptionCandidate candidate_fields(const json& j, const std::string& prefix) {
  CaptionCandidate c;
  c.text = get_string(j, "text", prefix);
  const std::string kind = get_string(j, "kind", prefix);
  auto parsed = parse_caption_kind(kind);
  if (!parsed) fail(join(prefix, "kind"), "unknown kind '" + kind + "'");
  c.kind = *parsed;
  if (j.contains("score")) c.score = get_number(j, "score", prefix);
  if (j.contains("filtered")) {
    const json& f = j.at("filtered");
    if (!f.is_boolean()) fail(join(prefix, "filtered"), "expected boolean");
    c.filtered = f.get<bool>();
  }
  if (auto err = check(c)) fail(prefix, *err);
  return c;
}

void put_moment(json& j, const MomentRecord& m) {
  j["video_id"] = m.video_id;
  j["t_s"] = m.t_s;
  j["t_e"] = m.t_e;
  j["q"] = m.q;
  j["split"] = std::string(to_string(m.split));
}

template <typename T, typename FromJson>
std::vector<T> load_lines(const std::filesystem::path& path, FromJson from) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      out.push_back(from(j));
    } catch (const DatasetError& e) {
      // Re-attach the real line number.
      std::string what = e.what();
      const std::string lead = "line 0: " + e.field() + ": ";
      std::string detail = what.rfind(lead, 0) == 0 ? what.substr(lead.size()) : what;
      throw DatasetError(line, e.field(), detail);
    }
  });
  return out;
}

template <typename T>
std::string serialize_all(std::span<const T> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_line(to_json(r));
    out += '\n';
  }
  return out;
}

}  // namespace

json to_json(const MomentRecord& m) {
  json j = json::object();
  put_moment(j, m);
  return j;
}

json to_json(const CaptionCandidate& c) {
  json j = json::object();
  j["text"] = c.text;
  j["kind"] = std::string(to_string(c.kind));
  if (c.score) j["score"] = *c.score;
  if (c.filtered) j["filtered"] = true;
  return j;
}

json to_json(const AnnotatedMoment& a) {
  json j = json::object();
  put_moment(j, a.moment);
  j["statics"] = json::array();
  for (const auto& c : a.statics) j["statics"].push_back(to_json(c));
  j["dynamics"] = json::array();
  for (const auto& c : a.dynamics) j["dynamics"].push_back(to_json(c));
  if (a.selected) {
    j["selected"] = {{"kind", std::string(to_string(a.selected->kind))},
                     {"index", a.selected->index}};
  }
  if (!a.flags.empty()) j["flags"] = a.flags;
  return j;
}

json to_json(const DisturbedSet& d) {
  json j = json::object();
  j["source"] = to_json(d.source);
  j["positives"] = d.positives;
  j["static_negs"] = d.static_negs;
  j["dynamic_negs"] = d.dynamic_negs;
  j["best_pos"] = d.best_pos;
  j["best_static_neg"] = d.best_static_neg;
  j["best_dynamic_neg"] = d.best_dynamic_neg;
  if (!d.flags.empty()) j["flags"] = d.flags;
  return j;
}

MomentRecord moment_from_json(const json& j) { return moment_fields(j, ""); }

CaptionCandidate candidate_from_json(const json& j) {
  return candidate_fields(j, "");
}

AnnotatedMoment annotated_from_json(const json& j) {
  AnnotatedMoment a;
  a.moment = moment_fields(j, "");
  auto read_list = [&](const char* name, std::vector<CaptionCandidate>& out) {
    const json& arr = field(j, name, "");
    if (!arr.is_array()) fail(name, "expected array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(
          candidate_fields(arr[i], std::string(name) + "[" + std::to_string(i) + "]"));
    }
  };
  read_list("statics", a.statics);
  read_list("dynamics", a.dynamics);
  if (j.contains("selected")) {
    const json& sel = j.at("selected");
    const std::string kind = get_string(sel, "kind", "selected");
    auto parsed = parse_caption_kind(kind);
    if (!parsed) fail("selected.kind", "unknown kind '" + kind + "'");
    const json& idx = field(sel, "index", "selected");
    if (!idx.is_number_unsigned()) fail("selected.index", "expected non-negative integer");
    a.selected = Selection{*parsed, idx.get<std::size_t>()};
  }
  a.flags = get_flags(j);
  if (auto err = check(a)) fail("<record>", *err);
  return a;
}

DisturbedSet disturbed_from_json(const json& j) {
  DisturbedSet d;
  d.source = moment_fields(field(j, "source", ""), "source");
  d.positives = get_strings(j, "positives");
  d.static_negs = get_strings(j, "static_negs");
  d.dynamic_negs = get_strings(j, "dynamic_negs");
  d.best_pos = get_string(j, "best_pos");
  d.best_static_neg = get_string(j, "best_static_neg");
  d.best_dynamic_neg = get_string(j, "best_dynamic_neg");
  d.flags = get_flags(j);
  if (auto err = check(d)) fail("<record>", *err);
  return d;
}

std::string to_line(const json& j) {
  // Replace invalid UTF-8 rather than throwing mid-stage.
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<MomentRecord> load_moments(const std::filesystem::path& path) {
  return load_lines<MomentRecord>(path, moment_from_json);
}

std::vector<AnnotatedMoment> load_fig(const std::filesystem::path& path) {
  return load_lines<AnnotatedMoment>(path, annotated_from_json);
}

std::vector<DisturbedSet> load_disturbed(const std::filesystem::path& path) {
  return load_lines<DisturbedSet>(path, disturbed_from_json);
}

Dataset load_dataset(const std::filesystem::path& path, Schema schema) {
  switch (schema) {
    case Schema::kCoarse: return load_moments(path);
    case Schema::kFig: return load_fig(path);
    case Schema::kDisturbed: return load_disturbed(path);
  }
  throw InvalidArgument("unknown schema");
}

std::string serialize(std::span<const MomentRecord> r) { return serialize_all(r); }
std::string serialize(std::span<const AnnotatedMoment> r) { return serialize_all(r); }
std::string serialize(std::span<const DisturbedSet> r) { return serialize_all(r); }

void save_dataset(std::span<const MomentRecord> records,
                  const std::filesystem::path& path) {
  write_file_atomic(path, serialize(records));
}

void save_dataset(std::span<const AnnotatedMoment> records,
                  const std::filesystem::path& path) {
  write_file_atomic(path, serialize(records));
}

void save_dataset(std::span<const DisturbedSet> records,
                  const std::filesystem::path& path) {
  write_file_atomic(path, serialize(records));
}

}  // namespace finecap
