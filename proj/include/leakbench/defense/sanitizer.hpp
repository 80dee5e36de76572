#pragma once

// Input sanitizer for user text and retrieved excerpts.
//
// Rule order (fixed):
//   1. strip-html-comments     <!-- ... --> removed; unterminated "<!--" is
//                              left in place and flagged malformed-markup
//   2. strip-html-tags         <[A-Za-z/!][^<>]*> removed
//   3. rewrite-reference-links [text][id] + "[id]: url" -> [text](url),
//                              definition removed
//   4. normalize-homoglyphs    Cyrillic/Greek/fullwidth lookalikes -> ASCII,
//                              zero-width characters dropped
//   5. escape-special-tokens   "<|x|>" -> "<\|x|>", "[INST]" -> "[\INST]",
//                              "[[INJECT:" -> "[[\INJECT:", C0 controls
//                              other than \t \n \r dropped
//   6. keyword-flag            flags only
// The pipeline is repeated until the text stops changing (at most 8
// passes) so that sanitize(sanitize(x)) == sanitize(x).

#include <algorithm>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "leakbench/text.hpp"

namespace leakbench::defense {

struct SanitizerRuleSet {
  bool strip_html_comments = true;
  bool strip_html_tags = true;
  bool rewrite_reference_links = true;
  bool normalize_homoglyphs = true;
  bool escape_special_tokens = true;
  bool keyword_flag = true;
  std::vector<std::string> keywords = {"ignore previous", "ignore the above", "ignore all prior",
                                       "disregard", "system prompt", "exfiltrate"};

  static SanitizerRuleSet all_on() { return {}; }
};

struct SanitizeResult {
  std::string text;
  std::vector<std::string> flags;
};

namespace detail {

inline void add_flag(std::vector<std::string>& flags, std::string_view f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.emplace_back(f);
}

inline std::string strip_comments(std::string_view s, std::vector<std::string>& flags) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto open = s.find("<!--", i);
    if (open == std::string_view::npos) {
      out.append(s.substr(i));
      break;
    }
    const auto close = s.find("-->", open + 4);
    if (close == std::string_view::npos) {
      add_flag(flags, "malformed-markup");
      out.append(s.substr(i));
      break;
    }
    out.append(s.substr(i, open - i));
    add_flag(flags, "html-comment");
    i = close + 3;
  }
  return out;
}

inline std::string strip_tags(const std::string& s, std::vector<std::string>& flags) {
  static const std::regex tag(R"(<[A-Za-z/!][^<>]*>)");
  if (!std::regex_search(s, tag)) return s;
  add_flag(flags, "html-tag");
  return std::regex_replace(s, tag, "");
}

inline std::string rewrite_links(const std::string& s, std::vector<std::string>& flags) {
  static const std::regex def(R"((^|\n|[ \t]+)\[([^\]\n]+)\]:[ \t]*(\S+)[^\n]*)");
  static const std::regex ref(R"(\[([^\]\n]+)\]\[([^\]\n]*)\])");
  std::map<std::string, std::string> urls;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), def); it != std::sregex_iterator(); ++it) {
    urls.emplace(text::lower_ascii((*it)[2].str()), (*it)[3].str());
  }
  if (urls.empty()) return s;

  // Replace references first, then drop the definitions.
  std::string replaced;
  std::size_t last = 0;
  bool any = false;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), ref); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    std::string id = m[2].str().empty() ? m[1].str() : m[2].str();
    auto u = urls.find(text::lower_ascii(id));
    if (u == urls.end()) continue;
    replaced.append(s, last, static_cast<std::size_t>(m.position(0)) - last);
    replaced += "[" + m[1].str() + "](" + u->second + ")";
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
    any = true;
  }
  replaced.append(s, last, std::string::npos);

  // A definition owning its line takes the line break with it.
  std::string out;
  last = 0;
  for (auto it = std::sregex_iterator(replaced.begin(), replaced.end(), def);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto begin = static_cast<std::size_t>(m.position(0));
    auto end = begin + static_cast<std::size_t>(m.length(0));
    if (begin == 0 && end < replaced.size() && replaced[end] == '\n') ++end;
    out.append(replaced, last, begin - last);
    last = end;
    any = true;
  }
  out.append(replaced, last, std::string::npos);
  if (any) add_flag(flags, "ref-link");
  return out;
}

inline char32_t homoglyph_target(char32_t cp) {
  static const std::map<char32_t, char32_t> table = {
      // Cyrillic
      {0x0410, 'A'}, {0x0412, 'B'}, {0x0415, 'E'}, {0x041A, 'K'}, {0x041C, 'M'}, {0x041D, 'H'},
      {0x041E, 'O'}, {0x0420, 'P'}, {0x0421, 'C'}, {0x0422, 'T'}, {0x0425, 'X'}, {0x0430, 'a'},
      {0x0435, 'e'}, {0x043E, 'o'}, {0x0440, 'p'}, {0x0441, 'c'}, {0x0443, 'y'}, {0x0445, 'x'},
      {0x0405, 'S'}, {0x0406, 'I'}, {0x0408, 'J'}, {0x0455, 's'}, {0x0456, 'i'}, {0x0458, 'j'},
      {0x0501, 'd'}, {0x04BB, 'h'}, {0x051B, 'q'}, {0x051D, 'w'},
      // Greek
      {0x0391, 'A'}, {0x0392, 'B'}, {0x0395, 'E'}, {0x0396, 'Z'}, {0x0397, 'H'}, {0x0399, 'I'},
      {0x039A, 'K'}, {0x039C, 'M'}, {0x039D, 'N'}, {0x039F, 'O'}, {0x03A1, 'P'}, {0x03A4, 'T'},
      {0x03A5, 'Y'}, {0x03A7, 'X'}, {0x03BF, 'o'}, {0x03BD, 'v'}, {0x03B9, 'i'},
  };
  if (cp >= 0xFF01 && cp <= 0xFF5E) return cp - 0xFF01 + 0x21;
  auto it = table.find(cp);
  return it == table.end() ? 0 : it->second;
}

inline bool zero_width(char32_t cp) {
  return (cp >= 0x200B && cp <= 0x200D) || cp == 0x2060 || cp == 0xFEFF || cp == 0x00AD;
}

inline std::string normalize(std::string_view s, std::vector<std::string>& flags) {
  std::string out;
  out.reserve(s.size());
  bool hit = false;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t start = i;
    const char32_t cp = text::next_code_point(s, i);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
      continue;
    }
    if (zero_width(cp)) {
      hit = true;
      continue;
    }
    if (const char32_t t = homoglyph_target(cp)) {
      out.push_back(static_cast<char>(t));
      hit = true;
      continue;
    }
    out.append(s.substr(start, i - start));
  }
  if (hit) add_flag(flags, "homoglyph");
  return out;
}

inline std::string escape_tokens(const std::string& s, std::vector<std::string>& flags) {
  static const std::regex chat_token(R"(<\|([A-Za-z0-9_]+)\|>)");
  std::string out;
  bool hit = false;
  for (unsigned char c : s) {
    if (c < 0x20 && c != '\t' && c != '\n' && c != '\r') {
      hit = true;
      continue;
    }
    if (c == 0x7F) {
      hit = true;
      continue;
    }
    out.push_back(static_cast<char>(c));
  }
  if (std::regex_search(out, chat_token)) {
    out = std::regex_replace(out, chat_token, "<\\|$1|>");
    hit = true;
  }
  for (const auto& [from, to] : {std::pair<std::string_view, std::string_view>{"[INST]", "[\\INST]"},
                                 {"[/INST]", "[\\/INST]"},
                                 {"[[INJECT:", "[[\\INJECT:"}}) {
    if (out.find(from) != std::string::npos) {
      text::replace_all(out, from, to);
      hit = true;
    }
  }
  if (hit) add_flag(flags, "special-token");
  return out;
}

inline std::string sanitize_once(const SanitizerRuleSet& rules, std::string s,
                                 std::vector<std::string>& flags) {
  if (rules.strip_html_comments) s = strip_comments(s, flags);
  if (rules.strip_html_tags) s = strip_tags(s, flags);
  if (rules.rewrite_reference_links) s = rewrite_links(s, flags);
  if (rules.normalize_homoglyphs) s = normalize(s, flags);
  if (rules.escape_special_tokens) s = escape_tokens(s, flags);
  if (rules.keyword_flag) {
    for (const auto& k : rules.keywords) {
      if (text::contains_ci(s, k)) {
        add_flag(flags, "keyword");
        break;
      }
    }
  }
  return s;
}

}  // namespace detail

inline SanitizeResult sanitize(const SanitizerRuleSet& rules, std::string_view input) {
  SanitizeResult r;
  std::string cur(input);
  for (int pass = 0; pass < 8; ++pass) {
    std::string next = detail::sanitize_once(rules, cur, r.flags);
    if (next == cur) break;
    cur = std::move(next);
  }
  r.text = std::move(cur);
  return r;
}

}  // namespace leakbench::defense
