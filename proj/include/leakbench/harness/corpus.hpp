#pragma once

// Conversation files.
//
//   # comment
//   ## id=benign-0001 label=benign strategy=-
//   user: When is the team offsite?
//   assistant: The team offsite is on the second Thursday in June.
//
// One turn per line, role-prefixed. Backslash and newline inside a turn are
// written as \\ and \n. A conversation ends at the next header or EOF.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "leakbench/defense/roc.hpp"
#include "leakbench/errors.hpp"

namespace leakbench::harness {

inline std::string escape_line(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out.push_back(c);
  }
  return out;
}

inline std::string unescape_line(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 'n' ? '\n' : n == 'r' ? '\r' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

inline void write_conversations(std::ostream& out, const std::vector<defense::LabeledConversation>& convs) {
  for (const auto& c : convs) {
    out << "## id=" << c.id << " label=" << (c.attack ? "attack" : "benign")
        << " strategy=" << (c.strategy.empty() ? "-" : c.strategy) << "\n";
    for (const auto& t : c.turns) {
      out << "user: " << escape_line(t.query) << "\n";
      if (t.payload) out << "assistant: " << escape_line(*t.payload) << "\n";
    }
    out << "\n";
  }
}

inline std::vector<defense::LabeledConversation> parse_conversations(std::istream& in,
                                                                     const std::string& name) {
  std::vector<defense::LabeledConversation> out;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(name + ":" + std::to_string(lineno), msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line[0] == '#' && line.rfind("##", 0) != 0)) continue;
    if (line.rfind("## ", 0) == 0) {
      defense::LabeledConversation c;
      std::istringstream fields(line.substr(3));
      std::string f;
      bool labeled = false;
      while (fields >> f) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) fail("malformed header field '" + f + "'");
        const auto key = f.substr(0, eq), value = f.substr(eq + 1);
        if (key == "id") c.id = value;
        else if (key == "label") {
          if (value != "benign" && value != "attack") fail("label must be benign or attack");
          c.attack = value == "attack";
          labeled = true;
        } else if (key == "strategy") c.strategy = value == "-" ? "" : value;
      }
      if (!labeled) fail("header needs a label");
      out.push_back(std::move(c));
      continue;
    }
    if (out.empty()) fail("turn before the first conversation header");
    auto& turns = out.back().turns;
    if (line.rfind("user: ", 0) == 0) {
      turns.push_back({unescape_line(std::string_view(line).substr(6)), std::nullopt});
    } else if (line.rfind("assistant: ", 0) == 0) {
      if (turns.empty() || turns.back().payload) fail("assistant line without a preceding user line");
      turns.back().payload = unescape_line(std::string_view(line).substr(11));
    } else {
      fail("expected 'user: ' or 'assistant: '");
    }
  }
  return out;
}

inline std::vector<defense::LabeledConversation> read_conversations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  return parse_conversations(in, path.string());
}

}  // namespace leakbench::harness
