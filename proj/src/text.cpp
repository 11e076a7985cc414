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

#include "finecap/text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "finecap/errors.hpp"

namespace finecap {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

std::string strip_fences(std::string_view response) {
  std::string out;
  std::size_t start = 0;
  while (start <= response.size()) {
    std::size_t end = response.find('\n', start);
    if (end == std::string_view::npos) end = response.size();
    std::string line = trim(response.substr(start, end - start));
    if (line.rfind("```", 0) != 0) {
      out.append(response.substr(start, end - start));
      out += '\n';
    }
    start = end + 1;
  }
  return out;
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return trim(s);
}

std::string regex_escape(std::string_view s) {
  static const std::string kSpecial = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (char c : s) {
    if (kSpecial.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_caption(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && (is_terminal_punct(out.back()) || is_space(out.back()))) {
    out.pop_back();
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::string> parse_numbered_list(std::string_view response) {
  static const std::regex kNumbered(R"(^\s*(?:[-*]\s*)?(?:\*\*)?\(?(\d+)[.):](?:\*\*)?\s+(.*\S)\s*$)");
  static const std::regex kBullet(R"(^\s*[-*]\s+(.*\S)\s*$)");
  const std::string body = strip_fences(response);
  std::vector<std::string> numbered, bullets;
  std::size_t start = 0;
  while (start < body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string::npos) end = body.size();
    const std::string line = body.substr(start, end - start);
    std::smatch m;
    if (std::regex_match(line, m, kNumbered)) {
      std::string item = unquote(m[2].str());
      if (!item.empty()) numbered.push_back(std::move(item));
    } else if (std::regex_match(line, m, kBullet)) {
      std::string item = unquote(m[1].str());
      if (!item.empty()) bullets.push_back(std::move(item));
    }
    start = end + 1;
  }
  return numbered.empty() ? bullets : numbered;
}

std::map<std::string, std::string> parse_labeled_sections(
    std::string_view response, const std::vector<std::string>& labels) {
  if (labels.empty()) return {};
  // Longest labels first so "FULL DESCRIPTION" wins over "FULL".
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::string alt;
  for (const auto& l : sorted) {
    if (!alt.empty()) alt += '|';
    alt += regex_escape(l);
  }
  const std::regex re("[|\\n][ \\t]*(?:\\*\\*)?(" + alt + ")(?:\\*\\*)?[ \\t]*:(?:\\*\\*)?",
                      std::regex::icase);
  const std::string text = "\n" + strip_fences(response);

  struct Hit {
    std::string label;
    std::size_t content_begin;
    std::size_t match_begin;
  };
  std::vector<Hit> hits;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
       it != std::sregex_iterator(); ++it) {
    const std::string found = (*it)[1].str();
    std::string canonical = found;
    for (const auto& l : labels) {
      if (to_lower(l) == to_lower(found)) canonical = l;
    }
    hits.push_back({canonical, static_cast<std::size_t>(it->position() + it->length()),
                    static_cast<std::size_t>(it->position())});
  }
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t end = i + 1 < hits.size() ? hits[i + 1].match_begin : text.size();
    std::string content = trim(std::string_view(text).substr(
        hits[i].content_begin, end - hits[i].content_begin));
    while (!content.empty() && content.back() == '|') {
      content.pop_back();
      content = trim(content);
    }
    // First occurrence wins; models sometimes echo labels in later prose.
    if (!content.empty() && !out.contains(hits[i].label)) {
      out.emplace(hits[i].label, std::move(content));
    }
  }
  return out;
}

std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    const std::size_t close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw InvalidArgument("unterminated placeholder in template");
    }
    out.append(tpl.substr(pos, open - pos));
    const std::string name = trim(tpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw InvalidArgument("unknown template placeholder '" + name + "'");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace finecap
