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

#include "finecap/backends.hpp"
#include "finecap/digest.hpp"
#include "finecap/io.hpp"
#include "finecap/resources.hpp"
#include "json.hpp"

namespace finecap {

using nlohmann::json;

std::vector<MockRule> parse_mock_rules(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("mock_rules", e.what());
  }
  const json& rules = j.is_object() ? j.value("rules", json::array()) : j;
  if (!rules.is_array()) throw ConfigError("mock_rules.rules", "expected array");
  std::vector<MockRule> out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string at = "mock_rules.rules[" + std::to_string(i) + "]";
    const json& r = rules[i];
    if (!r.is_object()) throw ConfigError(at, "expected object");
    MockRule rule;
    if (r.contains("role") && !r.at("role").is_null()) {
      auto role = parse_role(r.at("role").get<std::string>());
      if (!role) throw ConfigError(at + ".role", "unknown role");
      rule.role = role;
    }
    if (!r.contains("match") || !r.at("match").is_string()) {
      throw ConfigError(at + ".match", "expected string");
    }
    if (!r.contains("output") || !r.at("output").is_string()) {
      throw ConfigError(at + ".output", "expected string");
    }
    rule.pattern = r.at("match").get<std::string>();
    rule.output = r.at("output").get<std::string>();
    out.push_back(std::move(rule));
  }
  return out;
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
  return parse_mock_rules(read_file(path));
}

std::vector<MockRule> builtin_mock_rules() {
  return parse_mock_rules(resources::mock_rules_json());
}

MockChatTransport::MockChatTransport(std::vector<MockRule> rules, std::string model)
    : model_(std::move(model)) {
  for (auto& r : rules) {
    std::regex re;
    try {
      re = std::regex(r.pattern);
    } catch (const std::regex_error& e) {
      throw ConfigError("mock_rules", "bad pattern '" + r.pattern + "': " + e.what());
    }
    rules_.push_back({std::move(r), std::move(re)});
  }
}

namespace {

std::string render(const std::string& tpl, const std::smatch& m, const ChatRequest& req,
                   const std::string& digest) {
  std::string out;
  std::size_t pos = 0;
  int picks = 0;
  while (true) {
    const std::size_t open = tpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl, pos);
      break;
    }
    const std::size_t close = tpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tpl, pos);
      break;
    }
    out.append(tpl, pos, open - pos);
    const std::string name = tpl.substr(open + 2, close - open - 2);
    if (name.size() == 1 && name[0] >= '0' && name[0] <= '9') {
      const auto g = static_cast<std::size_t>(name[0] - '0');
      if (g < m.size()) out += m[g].str();
    } else if (name == "prompt") {
      out += req.user;
    } else if (name == "seed") {
      out += std::to_string(req.seed);
    } else if (name == "images") {
      out += std::to_string(req.images.size());
    } else if (name.rfind("pick:", 0) == 0) {
      std::vector<std::string> options;
      std::size_t s = 5;
      while (true) {
        const std::size_t bar = name.find('|', s);
        options.push_back(name.substr(s, bar == std::string::npos ? std::string::npos : bar - s));
        if (bar == std::string::npos) break;
        s = bar + 1;
      }
      const std::uint64_t h = sha256_u64(digest + "#" + std::to_string(picks++));
      out += options[h % options.size()];
    } else {
      out += "{{" + name + "}}";
    }
    pos = close + 2;
  }
  return out;
}

}  // namespace

std::string MockChatTransport::send(Role role, const ChatRequest& req) {
  ++sends_;
  for (const auto& c : rules_) {
    if (c.rule.role && *c.rule.role != role) continue;
    std::smatch m;
    if (!std::regex_search(req.user, m, c.re)) continue;
    const std::string& out = c.rule.output;
    if (out == "!empty") return "";
    if (out == "!fail:network") {
      throw TransportError(TransportError::Kind::kRetryable, "mock network failure");
    }
    if (out == "!fail:auth") throw TransportError(TransportError::Kind::kAuth, "mock auth failure");
    // Pure function of the request (incl. seed): the digest drives {{pick}}.
    return render(out, m, req, request_digest(role, model_, req));
  }
  throw TransportError(TransportError::Kind::kFatal,
                       "no mock rule matches " + std::string(to_string(role)) + " prompt");
}

}  // namespace finecap
