#pragma once

// Labeled corpus synthesis. Benign conversations are filled-in workplace
// templates answered from the document store; attack conversations are
// attacker transcripts from bundled scenarios.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakbench/harness/corpus.hpp"
#include "leakbench/harness/runner.hpp"
#include "leakbench/harness/scenario.hpp"

namespace leakbench::harness {

struct AttackSource {
  std::filesystem::path config;
  double weight = 1.0;
  std::size_t max_turns = 6;
};

struct CorpusSpec {
  std::uint64_t seed = 0;
  std::size_t benign = 100;
  std::size_t attack = 100;
  std::filesystem::path store_dir;
  std::string benign_role;
  std::map<std::string, std::vector<std::string>> slots;
  std::vector<std::string> templates;
  std::size_t min_turns = 1;
  std::size_t max_turns = 4;
  std::vector<AttackSource> attacks;
};

inline CorpusSpec load_corpus_spec(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
  const auto base = path.parent_path();
  CorpusSpec s;
  s.seed = opt(j, "seed") ? as_u64(*opt(j, "seed"), "seed") : 0;
  s.benign = as_u64(req(j, "benign", ""), "benign");
  s.attack = as_u64(req(j, "attack", ""), "attack");
  s.store_dir = base / as_string(req(j, "store", ""), "store");
  s.benign_role = as_string(req(j, "benign_role", ""), "benign_role");
  // Inline object or a path to a file holding one.
  json tfile;
  const json* bp = &req(j, "benign_templates", "");
  if (bp->is_string()) {
    const auto tp = base / bp->get<std::string>();
    std::ifstream tin(tp);
    if (!tin) throw FileError("cannot open " + tp.string());
    try {
      tfile = json::parse(tin, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError(tp.string(), e.what());
    }
    bp = &tfile;
  }
  const auto& b = *bp;
  s.templates = as_strings(req(b, "templates", "benign_templates"), "benign_templates.templates");
  if (s.templates.empty()) throw ConfigError("benign_templates.templates", "must be non-empty");
  if (const auto* slots = opt(b, "slots")) {
    for (auto it = slots->begin(); it != slots->end(); ++it) {
      s.slots[it.key()] = as_strings(it.value(), "benign_templates.slots." + it.key());
    }
  }
  if (const auto* t = opt(b, "turns")) {
    if (!t->is_array() || t->size() != 2) throw ConfigError("benign_templates.turns", "expected [min, max]");
    s.min_turns = as_u64((*t)[0], "benign_templates.turns[0]");
    s.max_turns = as_u64((*t)[1], "benign_templates.turns[1]");
    if (s.min_turns < 1 || s.max_turns < s.min_turns) throw ConfigError("benign_templates.turns", "need 1 <= min <= max");
  }
  const json none = json::array();
  const auto& a = s.attack ? req(j, "attack_scenarios", "") : (opt(j, "attack_scenarios") ? *opt(j, "attack_scenarios") : none);
  if (!a.is_array() || (s.attack && a.empty())) throw ConfigError("attack_scenarios", "expected a non-empty array");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto p = "attack_scenarios[" + std::to_string(i) + "]";
    AttackSource src;
    src.config = base / as_string(req(a[i], "config", p), p + ".config");
    src.weight = number_or(a[i], "weight", p, 1.0);
    if (!(src.weight > 0.0)) throw ConfigError(p + ".weight", "must be positive");
    if (const auto* m = opt(a[i], "max_turns")) src.max_turns = as_u64(*m, p + ".max_turns");
    s.attacks.push_back(std::move(src));
  }
  return s;
}

namespace detail {

inline std::string fill_template(const std::string& tpl, const std::map<std::string, std::vector<std::string>>& slots,
                                 Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    const auto open = tpl.find('{', i);
    if (open == std::string::npos) {
      out.append(tpl, i, std::string::npos);
      break;
    }
    const auto close = tpl.find('}', open);
    if (close == std::string::npos) throw ConfigError("benign_templates", "unclosed slot in '" + tpl + "'");
    out.append(tpl, i, open - i);
    const auto name = tpl.substr(open + 1, close - open - 1);
    auto it = slots.find(name);
    if (it == slots.end() || it->second.empty()) {
      throw ConfigError("benign_templates.slots." + name, "slot used by a template is not defined");
    }
    out += it->second[uniform_below(rng, it->second.size())];
    i = close + 1;
  }
  return out;
}

// First sentence of the best-matching accessible document.
inline std::string benign_answer(const DocumentStore& store, const std::string& role, const std::string& q) {
  const auto ex = retrieve(store, q, role, RetrievalOptions{true, false}, "");
  if (ex.empty()) return "I couldn't find anything about that in the documents you can access.";
  std::string body = ex[0].text;
  const auto end = body.find_first_of(".\n", 0);
  if (end != std::string::npos) body = body.substr(0, end + 1);
  return "From " + ex[0].title + ": " + body;
}

}  // namespace detail

inline std::vector<defense::LabeledConversation> generate_corpus(const CorpusSpec& spec) {
  std::vector<defense::LabeledConversation> out;
  const auto store = DocumentStore::load(spec.store_dir);

  Rng rng(derive_seed(spec.seed, 1));
  for (std::size_t i = 0; i < spec.benign; ++i) {
    defense::LabeledConversation c;
    char id[32];
    std::snprintf(id, sizeof id, "benign-%04zu", i + 1);
    c.id = id;
    const auto n = spec.min_turns + uniform_below(rng, spec.max_turns - spec.min_turns + 1);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& tpl = spec.templates[uniform_below(rng, spec.templates.size())];
      auto q = detail::fill_template(tpl, spec.slots, rng);
      auto a = detail::benign_answer(store, spec.benign_role, q);
      c.turns.push_back({std::move(q), std::move(a)});
    }
    out.push_back(std::move(c));
  }

  std::vector<std::unique_ptr<Experiment>> experiments;
  double total_weight = 0.0;
  for (const auto& a : spec.attacks) {
    auto cfg = load_scenario(a.config);
    cfg.max_turns = a.max_turns;
    cfg.seed = derive_seed(spec.seed, 100 + experiments.size());
    experiments.push_back(std::make_unique<Experiment>(std::move(cfg)));
    total_weight += a.weight;
  }
  Rng pick(derive_seed(spec.seed, 2));
  for (std::size_t i = 0; i < spec.attack; ++i) {
    const double u = uniform01(pick) * total_weight;
    std::size_t k = 0;
    for (double acc = spec.attacks[0].weight; k + 1 < spec.attacks.size() && u >= acc;) {
      acc += spec.attacks[++k].weight;
    }
    const auto& ex = *experiments[k];
    const auto tr = run_trial(ex, i);
    defense::LabeledConversation c;
    char id[32];
    std::snprintf(id, sizeof id, "attack-%04zu", i + 1);
    c.id = id;
    c.attack = true;
    c.strategy = std::string(to_string(ex.config().policy.strategy));
    for (const auto& t : tr.attack.transcript.turns) {
      const auto& o = t.observation;
      c.turns.push_back({t.query.text, o.payload ? *o.payload : o.text});
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace leakbench::harness
