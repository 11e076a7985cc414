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

#include <cstdlib>

#include "finecap/backends.hpp"
#include "finecap/digest.hpp"
#include "httplib.h"
#include "json.hpp"

namespace finecap {

using nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

namespace {

httplib::Headers auth_headers(const BackendConfig& cfg) {
  httplib::Headers headers;
  if (!cfg.token_env.empty()) {
    if (const char* token = std::getenv(cfg.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

// One POST; maps transport and status failures onto TransportError kinds.
std::string post_json(const BackendConfig& cfg, const std::string& body) {
  const auto [base, path] = split_url(cfg.endpoint);
  httplib::Client client(base);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path, auth_headers(cfg), body, "application/json");
  if (!res) {
    throw TransportError(TransportError::Kind::kRetryable,
                         "request to " + cfg.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw TransportError(TransportError::Kind::kAuth, "HTTP " + std::to_string(status));
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw TransportError(TransportError::Kind::kRetryable, "HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw TransportError(TransportError::Kind::kFatal,
                         "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
  }
  return res->body;
}

}  // namespace

HttpChatTransport::HttpChatTransport(BackendConfig cfg) : cfg_(std::move(cfg)) {
  if (auto err = check(cfg_)) throw ConfigError("backend", *err);
}

std::string HttpChatTransport::build_body(Role, const ChatRequest& req) const {
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  if (req.images.empty()) {
    messages.push_back({{"role", "user"}, {"content", req.user}});
  } else {
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", req.user}});
    for (const auto& img : req.images) {
      parts.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:" + img.media_type + ";base64," + base64_encode(img.data)}}}});
    }
    messages.push_back({{"role", "user"}, {"content", parts}});
  }
  json body = {{"model", cfg_.model},
               {"messages", messages},
               {"temperature", req.temperature},
               {"seed", req.seed}};
  return body.dump();
}

std::string HttpChatTransport::parse_response(std::string_view body) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return "";
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(TransportError::Kind::kFatal,
                         std::string("malformed chat-completion response: ") + e.what());
  }
}

std::string HttpChatTransport::send(Role role, const ChatRequest& req) {
  return parse_response(post_json(cfg_, build_body(role, req)));
}

HttpEmbedder::HttpEmbedder(BackendConfig cfg, std::size_t dim, RetryPolicy retry)
    : cfg_(std::move(cfg)), dim_(dim), retry_(std::move(retry)) {
  if (auto err = check(cfg_)) throw ConfigError("embedder", *err);
  if (dim_ == 0) throw ConfigError("embedder.dim", "must be positive");
  if (!cfg_.cache_dir.empty()) cache_.emplace(cfg_.cache_dir);
}

std::vector<EmbeddingVector> HttpEmbedder::fetch(std::span<const std::string> texts) {
  const json body = {{"model", cfg_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const std::string payload = body.dump();
  int attempts = 0;
  const std::string raw = detail::send_with_retry(
      retry_, sha256_u64(payload), [&] { return post_json(cfg_, payload); }, attempts);
  std::vector<EmbeddingVector> out;
  try {
    const json j = json::parse(raw);
    const json& data = j.at("data");
    for (const auto& item : data) out.push_back(item.at("embedding").get<EmbeddingVector>());
  } catch (const json::exception& e) {
    throw BackendError(BackendFailure::kProtocol, std::string("malformed embeddings response: ") + e.what(),
                       attempts);
  }
  if (out.size() != texts.size()) {
    throw BackendError(BackendFailure::kProtocol, "embedding count mismatch", attempts);
  }
  return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_raw(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  auto key_for = [&](const std::string& t) {
    return sha256_hex(json({{"role", "embed"}, {"model", cfg_.model}, {"text", t}}).dump());
  };
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache_) {
      if (auto hit = cache_->get(key_for(texts[i]))) {
        out[i] = json::parse(*hit).get<EmbeddingVector>();
        continue;
      }
    }
    missing.push_back(texts[i]);
    missing_at.push_back(i);
  }
  if (!missing.empty()) {
    auto fetched = fetch(missing);
    for (std::size_t k = 0; k < missing.size(); ++k) {
      if (cache_) cache_->put(key_for(missing[k]), json(fetched[k]).dump());
      out[missing_at[k]] = std::move(fetched[k]);
    }
  }
  return out;
}

}  // namespace finecap
