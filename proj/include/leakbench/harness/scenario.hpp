#pragma once

// Scenario files: one JSON document (comments allowed) per experiment.
// Schema in docs/formats.md. Every error names the offending field path.

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakbench/attacker.hpp"
#include "leakbench/defense/detector.hpp"
#include "leakbench/defense/roc.hpp"
#include "leakbench/errors.hpp"
#include "leakbench/harness/corpus.hpp"
#include "leakbench/oracle.hpp"
#include "leakbench/secretmodel.hpp"

namespace leakbench::harness {

using json = nlohmann::json;

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json* opt(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

inline const json& req(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const auto* v = opt(j, key);
  if (!v) throw ConfigError(join(path, key), "required field is missing");
  return *v;
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

inline std::uint64_t as_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::vector<std::string> as_strings(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_string(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename T, typename Parse>
T parse_enum(const json& v, const std::string& path, Parse parse, const char* expected) {
  const auto s = as_string(v, path);
  auto r = parse(s);
  if (!r) throw ConfigError(path, "unknown value '" + s + "' (expected " + expected + ")");
  return *r;
}

inline double number_or(const json& j, const char* key, const std::string& path, double dflt) {
  const auto* v = opt(j, key);
  return v ? as_number(*v, join(path, key)) : dflt;
}

inline bool bool_or(const json& j, const char* key, const std::string& path, bool dflt) {
  const auto* v = opt(j, key);
  return v ? as_bool(*v, join(path, key)) : dflt;
}

// Numbers may be written as {"ln": x} to mean log(x).
inline double epsilon_value(const json& v, const std::string& path) {
  if (v.is_object()) {
    const auto x = as_number(req(v, "ln", path), join(path, "ln"));
    if (!(x > 0.0)) throw ConfigError(join(path, "ln"), "must be positive");
    return std::log(x);
  }
  return as_number(v, path);
}

}  // namespace detail

struct DetectorSettings {
  bool enabled = false;
  defense::DetectorConfig config;
  std::optional<double> theta;             // absent: calibrated on the calibration corpus
  std::optional<double> theta_quantile;    // default 0.95
  std::filesystem::path benign_corpus;     // n-gram training text
  std::filesystem::path calibration_corpus;
};

struct DefenseSettings {
  bool sanitizer = false;
  defense::SanitizerRuleSet sanitizer_rules;
  bool spotlight = false;
  double spotlight_fidelity = 1.0;
  bool dp = false;
  double dp_epsilon = 1.0;
  bool output_filter = false;
  DetectorSettings detector;
};

struct PriorSpec {
  enum class Kind { uniform, weights, position_weights } kind = Kind::uniform;
  std::vector<double> weights;
  std::vector<std::vector<double>> position_weights;
};

struct ScenarioConfig {
  std::string id;
  std::string description;
  std::filesystem::path source;  // file the config came from
  std::shared_ptr<const SecretSpace> space;
  PriorSpec prior;
  std::string noun = "secret";
  std::filesystem::path store_dir;
  std::string secret_doc;
  std::string role;
  ChannelSpec channel;
  AttackerPolicy policy;
  DefenseSettings defenses;
  std::size_t max_turns = 10;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  // The untouched document, for comparisons.
  json raw;
};

inline const std::vector<std::string>& defense_names() {
  static const std::vector<std::string> names = {"sanitizer", "spotlight", "dp", "output-filter",
                                                 "detector", "cutoff"};
  return names;
}

// --defense name=on|off
inline void apply_override(ScenarioConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("--defense", "expected name=on|off, got '" + spec + "'");
  const auto name = spec.substr(0, eq);
  const auto value = spec.substr(eq + 1);
  if (value != "on" && value != "off") throw ConfigError("--defense", "value must be on or off");
  const bool on = value == "on";
  auto& d = cfg.defenses;
  if (name == "sanitizer") d.sanitizer = on;
  else if (name == "spotlight") d.spotlight = on;
  else if (name == "dp") d.dp = on;
  else if (name == "output-filter") d.output_filter = on;
  else if (name == "detector") d.detector.enabled = on;
  else if (name == "cutoff") d.detector.config.cutoff = on;
  else throw ConfigError("--defense", "unknown defense '" + name + "'");
  if (name == "cutoff" && on) d.detector.enabled = true;
}

namespace detail {

inline std::shared_ptr<const SecretSpace> parse_space(const json& j, const std::string& path) {
  const auto kind = as_string(req(j, "kind", path), join(path, "kind"));
  const std::string id = opt(j, "id") ? as_string(*opt(j, "id"), join(path, "id")) : "secret";
  try {
    if (kind == "digit-code") {
      return std::make_shared<SecretSpace>(
          SecretSpace::digit_code(id, as_u64(req(j, "width", path), join(path, "width"))));
    }
    if (kind == "mixed-radix") {
      const auto& r = req(j, "radices", path);
      if (!r.is_array()) throw ConfigError(join(path, "radices"), "expected an array");
      std::vector<std::uint32_t> radices;
      for (std::size_t i = 0; i < r.size(); ++i) {
        radices.push_back(static_cast<std::uint32_t>(as_u64(r[i], join(path, "radices") + "[" + std::to_string(i) + "]")));
      }
      return std::make_shared<SecretSpace>(SecretSpace::mixed_radix(id, radices));
    }
    if (kind == "list") {
      return std::make_shared<SecretSpace>(
          SecretSpace::from_list(id, as_strings(req(j, "elements", path), join(path, "elements"))));
    }
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join(path, "kind"), "unknown value '" + kind + "' (expected digit-code|mixed-radix|list)");
}

inline PriorSpec parse_prior(const json* j, const std::string& path) {
  PriorSpec p;
  if (!j) return p;
  if (j->is_string()) {
    if (j->get<std::string>() != "uniform") throw ConfigError(path, "expected \"uniform\" or an object");
    return p;
  }
  if (const auto* w = opt(*j, "weights")) {
    p.kind = PriorSpec::Kind::weights;
    if (!w->is_array()) throw ConfigError(join(path, "weights"), "expected an array");
    for (std::size_t i = 0; i < w->size(); ++i) {
      p.weights.push_back(as_number((*w)[i], join(path, "weights") + "[" + std::to_string(i) + "]"));
    }
    return p;
  }
  if (const auto* w = opt(*j, "position_weights")) {
    p.kind = PriorSpec::Kind::position_weights;
    if (!w->is_array()) throw ConfigError(join(path, "position_weights"), "expected an array");
    for (std::size_t i = 0; i < w->size(); ++i) {
      const auto ip = join(path, "position_weights") + "[" + std::to_string(i) + "]";
      if (!(*w)[i].is_array()) throw ConfigError(ip, "expected an array");
      std::vector<double> row;
      for (std::size_t k = 0; k < (*w)[i].size(); ++k) {
        row.push_back(as_number((*w)[i][k], ip + "[" + std::to_string(k) + "]"));
      }
      p.position_weights.push_back(std::move(row));
    }
    return p;
  }
  throw ConfigError(path, "expected \"uniform\", {\"weights\": [...]} or {\"position_weights\": [...]}");
}

inline RuleMatcher parse_matcher(const json* j, const std::string& path) {
  RuleMatcher m;
  if (!j) return m;
  if (const auto* v = opt(*j, "kind")) {
    m.kind = parse_enum<QueryKind>(*v, join(path, "kind"), parse_query_kind,
                                   "direct-ask|yes-no-predicate|mask-completion|meta-recon|injected-content");
  }
  if (const auto* v = opt(*j, "framing")) {
    m.framing = parse_enum<Framing>(*v, join(path, "framing"), parse_framing, "plain|theoretical|hash");
  }
  if (const auto* v = opt(*j, "family")) {
    m.family = parse_enum<PredicateFamily>(*v, join(path, "family"), parse_predicate_family, "a predicate family");
  }
  return m;
}

inline ResponseRule parse_rule(const json& j, const std::string& path) {
  ResponseRule r;
  r.match = parse_matcher(opt(j, "match"), join(path, "match"));
  r.behavior = parse_enum<Behavior>(req(j, "behavior", path), join(path, "behavior"), parse_behavior,
                                    "answer-truthfully|refuse|leak|theoretical-hint");
  if (const auto* v = opt(j, "source")) {
    const auto s = as_string(*v, join(path, "source"));
    if (s == "context") r.source = Source::context;
    else if (s == "memorized") r.source = Source::memorized;
    else throw ConfigError(join(path, "source"), "unknown value '" + s + "' (expected context|memorized)");
  }
  r.leak_p = number_or(j, "leak_p", path, 1.0);
  if (!(r.leak_p >= 0.0 && r.leak_p <= 1.0)) throw ConfigError(join(path, "leak_p"), "must be in [0,1]");
  return r;
}

inline ChannelSpec parse_channel(const json& j, const std::string& path) {
  ChannelSpec c;
  if (const auto* rules = opt(j, "rules")) {
    if (!rules->is_array()) throw ConfigError(join(path, "rules"), "expected an array");
    for (std::size_t i = 0; i < rules->size(); ++i) {
      c.rules.push_back(parse_rule((*rules)[i], join(path, "rules") + "[" + std::to_string(i) + "]"));
    }
  }
  if (const auto* f = opt(j, "fallback")) c.fallback = parse_rule(*f, join(path, "fallback"));
  c.p_follow_injection = number_or(j, "p_follow_injection", path, 0.0);
  if (!(c.p_follow_injection >= 0.0 && c.p_follow_injection <= 1.0)) {
    throw ConfigError(join(path, "p_follow_injection"), "must be in [0,1]");
  }
  c.allow_hash_exfil = bool_or(j, "allow_hash_exfil", path, false);
  c.strict_acl = bool_or(j, "strict_acl", path, true);
  if (const auto* v = opt(j, "refusal_phrases")) {
    c.refusal_phrases = as_strings(*v, join(path, "refusal_phrases"));
    if (c.refusal_phrases.empty()) throw ConfigError(join(path, "refusal_phrases"), "must be non-empty");
  }
  if (c.rules.empty() && !c.fallback) throw ConfigError(join(path, "rules"), "at least one rule or a fallback is required");
  return c;
}

inline PoolEntry parse_pool_entry(const json& j, const std::string& path, const SecretSpace& space) {
  PoolEntry e;
  e.kind = parse_enum<QueryKind>(req(j, "kind", path), join(path, "kind"), parse_query_kind,
                                 "direct-ask|yes-no-predicate|mask-completion|meta-recon|injected-content");
  if (const auto* v = opt(j, "framing")) {
    e.framing = parse_enum<Framing>(*v, join(path, "framing"), parse_framing, "plain|theoretical|hash");
  }
  e.family = parse_enum<PredicateFamily>(req(j, "family", path), join(path, "family"), parse_predicate_family,
                                         "a predicate family");
  auto wildcard_or_u64 = [&](const char* key) -> std::optional<std::uint64_t> {
    const auto* v = opt(j, key);
    if (!v) return std::nullopt;
    if (v->is_string() && v->get<std::string>() == "*") return std::nullopt;
    return as_u64(*v, join(path, key));
  };
  if (auto p = wildcard_or_u64("position")) {
    if (*p >= space.width()) throw ConfigError(join(path, "position"), "position out of range");
    e.position = static_cast<std::size_t>(*p);
  }
  e.param = wildcard_or_u64("param");
  if (const auto* m = opt(j, "members")) {
    if (!m->is_array()) throw ConfigError(join(path, "members"), "expected an array of digits");
    for (std::size_t i = 0; i < m->size(); ++i) {
      const auto d = as_u64((*m)[i], join(path, "members") + "[" + std::to_string(i) + "]");
      if (e.members.size() <= d) e.members.resize(d + 1, false);
      e.members[d] = true;
    }
  }
  if (const auto* t = opt(j, "text")) e.text = as_string(*t, join(path, "text"));
  if (e.family == PredicateFamily::constant && e.text.empty()) {
    throw ConfigError(join(path, "text"), "constant queries need their text");
  }
  if (e.family == PredicateFamily::digit_in_set) {
    const auto r = e.position ? space.radix(*e.position) : space.radix(0);
    e.members.resize(r, false);
  }
  return e;
}

inline AttackerPolicy parse_policy(const json& j, const std::string& path, const SecretSpace& space) {
  AttackerPolicy p;
  p.strategy = parse_enum<Strategy>(req(j, "strategy", path), join(path, "strategy"), parse_strategy,
                                    "direct|digit-binary-search|greedy-info-gain|detection-aware|"
                                    "masked-completion|indirect-injection");
  p.lambda = number_or(j, "lambda", path, 0.0);
  if (!(p.lambda >= 0.0)) throw ConfigError(join(path, "lambda"), "must be >= 0");
  p.backoff = bool_or(j, "backoff", path, true);
  p.termination_bits = number_or(j, "termination_bits", path, kTerminationBits);
  if (const auto* t = opt(j, "injection_text")) p.injection_text = as_string(*t, join(path, "injection_text"));
  if (const auto* pool = opt(j, "pool")) {
    if (!pool->is_array()) throw ConfigError(join(path, "pool"), "expected an array");
    for (std::size_t i = 0; i < pool->size(); ++i) {
      p.pool.push_back(parse_pool_entry((*pool)[i], join(path, "pool") + "[" + std::to_string(i) + "]", space));
    }
  }
  if ((p.strategy == Strategy::greedy_info_gain || p.strategy == Strategy::detection_aware) && p.pool.empty()) {
    throw ConfigError(join(path, "pool"), "planning strategies need a non-empty candidate pool");
  }
  return p;
}

inline void parse_detector(const json& j, const std::string& path, const std::filesystem::path& base,
                           DetectorSettings& d) {
  d.enabled = bool_or(j, "enabled", path, false);
  auto& c = d.config;
  c.cutoff = bool_or(j, "cutoff", path, false);
  if (const auto* t = opt(j, "theta")) {
    if (t->is_string()) {
      if (t->get<std::string>() != "calibrated") throw ConfigError(join(path, "theta"), "expected a number or \"calibrated\"");
    } else {
      d.theta = as_number(*t, join(path, "theta"));
    }
  }
  if (const auto* q = opt(j, "theta_quantile")) d.theta_quantile = as_number(*q, join(path, "theta_quantile"));
  if (const auto* h = opt(j, "theta_hard")) c.theta_hard = as_number(*h, join(path, "theta_hard"));
  if (const auto* w = opt(j, "weights")) {
    const auto wp = join(path, "weights");
    c.weights.surprise = number_or(*w, "surprise", wp, c.weights.surprise);
    c.weights.similarity = number_or(*w, "similarity", wp, c.weights.similarity);
    c.weights.keywords = number_or(*w, "keywords", wp, c.weights.keywords);
    c.weights.leak = number_or(*w, "leak", wp, c.weights.leak);
  }
  if (const auto* k = opt(j, "keywords")) c.keywords = as_strings(*k, join(path, "keywords"));
  if (const auto* b = opt(j, "benign_corpus")) d.benign_corpus = base / as_string(*b, join(path, "benign_corpus"));
  if (const auto* b = opt(j, "calibration_corpus")) {
    d.calibration_corpus = base / as_string(*b, join(path, "calibration_corpus"));
  }
  if (d.enabled && c.weights.surprise != 0.0 && d.benign_corpus.empty()) {
    throw ConfigError(join(path, "benign_corpus"), "required when the surprise feature has weight");
  }
  if (d.enabled && !d.theta && d.calibration_corpus.empty()) {
    throw ConfigError(join(path, "calibration_corpus"), "required when theta is calibrated");
  }
}

inline DefenseSettings parse_defenses(const json* j, const std::string& path, const std::filesystem::path& base) {
  DefenseSettings d;
  if (!j) return d;
  if (const auto* s = opt(*j, "sanitizer")) {
    const auto sp = join(path, "sanitizer");
    d.sanitizer = bool_or(*s, "enabled", sp, false);
    if (const auto* r = opt(*s, "rules")) {
      const auto rp = join(sp, "rules");
      auto& rules = d.sanitizer_rules;
      rules.strip_html_comments = bool_or(*r, "strip-html-comments", rp, true);
      rules.strip_html_tags = bool_or(*r, "strip-html-tags", rp, true);
      rules.rewrite_reference_links = bool_or(*r, "rewrite-reference-links", rp, true);
      rules.normalize_homoglyphs = bool_or(*r, "normalize-homoglyphs", rp, true);
      rules.escape_special_tokens = bool_or(*r, "escape-special-tokens", rp, true);
      rules.keyword_flag = bool_or(*r, "keyword-flag", rp, true);
    }
    if (const auto* k = opt(*s, "keywords")) d.sanitizer_rules.keywords = as_strings(*k, join(sp, "keywords"));
  }
  if (const auto* s = opt(*j, "spotlight")) {
    const auto sp = join(path, "spotlight");
    d.spotlight = bool_or(*s, "enabled", sp, false);
    d.spotlight_fidelity = number_or(*s, "fidelity", sp, 1.0);
    if (!(d.spotlight_fidelity >= 0.0 && d.spotlight_fidelity <= 1.0)) {
      throw ConfigError(join(sp, "fidelity"), "must be in [0,1]");
    }
  }
  if (const auto* s = opt(*j, "dp")) {
    const auto sp = join(path, "dp");
    d.dp = bool_or(*s, "enabled", sp, false);
    if (const auto* e = opt(*s, "epsilon")) d.dp_epsilon = epsilon_value(*e, join(sp, "epsilon"));
    if (!(d.dp_epsilon >= 0.0)) throw ConfigError(join(sp, "epsilon"), "must be >= 0");
  }
  if (const auto* s = opt(*j, "output_filter")) {
    d.output_filter = bool_or(*s, "enabled", join(path, "output_filter"), false);
  }
  if (const auto* s = opt(*j, "detector")) parse_detector(*s, join(path, "detector"), base, d.detector);
  return d;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const json& j, const std::filesystem::path& base) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("", "scenario must be a JSON object");
  ScenarioConfig c;
  c.raw = j;
  c.id = as_string(req(j, "id", ""), "id");
  if (const auto* d = opt(j, "description")) c.description = as_string(*d, "description");
  c.space = parse_space(req(j, "secret", ""), "secret");
  c.prior = parse_prior(opt(j, "prior"), "prior");
  if (const auto* n = opt(j, "noun")) c.noun = as_string(*n, "noun");
  c.store_dir = base / as_string(req(j, "store", ""), "store");
  c.secret_doc = as_string(req(j, "secret_doc", ""), "secret_doc");
  c.role = as_string(req(j, "role", ""), "role");
  c.channel = parse_channel(req(j, "oracle", ""), "oracle");
  c.policy = parse_policy(req(j, "attacker", ""), "attacker", *c.space);
  c.defenses = parse_defenses(opt(j, "defenses"), "defenses", base);
  c.max_turns = as_u64(req(j, "max_turns", ""), "max_turns");
  if (c.max_turns < 1) throw ConfigError("max_turns", "must be >= 1");
  c.trials = opt(j, "trials") ? as_u64(*opt(j, "trials"), "trials") : 1;
  if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
  c.seed = opt(j, "seed") ? as_u64(*opt(j, "seed"), "seed") : 0;
  return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
  auto c = parse_scenario(j, path.parent_path());
  c.source = path;
  return c;
}

// Everything a trial needs, built once per scenario and shared read-only.
class Experiment {
 public:
  explicit Experiment(ScenarioConfig cfg) : cfg_(std::move(cfg)), prior_(build_prior()) {
    auto store = DocumentStore::load(cfg_.store_dir);
    if (!store.find(cfg_.secret_doc)) {
      throw ConfigError("secret_doc", "unknown document '" + cfg_.secret_doc + "'");
    }
    ChannelSpec channel = cfg_.channel;
    channel.spotlight_fidelity = cfg_.defenses.spotlight_fidelity;
    if (cfg_.defenses.dp) channel = with_dp(channel, cfg_.defenses.dp_epsilon);
    channel.seed = cfg_.seed;
    oracle_ = std::make_unique<Oracle>(channel, *cfg_.space, cfg_.noun, store, cfg_.secret_doc, cfg_.role);

    stack_.sanitizer = cfg_.defenses.sanitizer;
    stack_.sanitizer_rules = cfg_.defenses.sanitizer_rules;
    stack_.spotlight = cfg_.defenses.spotlight;
    stack_.output_filter = cfg_.defenses.output_filter;
    if (cfg_.defenses.detector.enabled) stack_.detector = build_detector(cfg_.defenses.detector, oracle_->store());
  }

  const ScenarioConfig& config() const noexcept { return cfg_; }
  const Oracle& oracle() const noexcept { return *oracle_; }
  const DefenseStack& defenses() const noexcept { return stack_; }
  const BeliefState& prior() const noexcept { return prior_; }

  static defense::DetectorConfig build_detector(const DetectorSettings& s, const DocumentStore& store) {
    auto d = s.config;
    if (!s.benign_corpus.empty()) {
      std::vector<std::string> lines;
      for (const auto& conv : read_conversations(s.benign_corpus)) {
        for (const auto& t : conv.turns) lines.push_back(t.query);
      }
      d.model.fit(lines);
    }
    d.index_store(store);
    if (s.theta) {
      d.theta = *s.theta;
    } else {
      std::vector<double> scores;
      for (const auto& conv : read_conversations(s.calibration_corpus)) {
        scores.push_back(defense::conversation_score(d, conv));
      }
      d.theta = defense::quantile(scores, s.theta_quantile.value_or(0.95));
    }
    d.validate();
    return d;
  }

  // Draws the trial's secret from the prior.
  std::uint64_t sample_secret(Rng& rng) const {
    const auto& space = *cfg_.space;
    switch (cfg_.prior.kind) {
      case PriorSpec::Kind::uniform: return uniform_below(rng, space.size());
      case PriorSpec::Kind::weights: {
        const auto p = prior_.probabilities();
        const double u = uniform01(rng);
        double acc = 0.0;
        for (std::uint64_t i = 0; i < p.size(); ++i) {
          acc += p[i];
          if (u < acc) return i;
        }
        for (std::uint64_t i = p.size(); i-- > 0;) {
          if (p[i] > 0.0) return i;
        }
        return 0;
      }
      case PriorSpec::Kind::position_weights: {
        std::vector<std::uint32_t> digits;
        for (std::size_t pos = 0; pos < space.width(); ++pos) {
          const auto m = prior_.position_marginal(pos);
          const double u = uniform01(rng);
          double acc = 0.0;
          std::uint32_t d = 0;
          for (; d + 1 < m.size(); ++d) {
            acc += m[d];
            if (u < acc && m[d] > 0.0) break;
          }
          digits.push_back(d);
        }
        return space.index_of(digits);
      }
    }
    return 0;
  }

 private:
  BeliefState build_prior() const {
    try {
      switch (cfg_.prior.kind) {
        case PriorSpec::Kind::uniform: return BeliefState::uniform(*cfg_.space);
        case PriorSpec::Kind::weights: return BeliefState::from_weights(*cfg_.space, cfg_.prior.weights);
        case PriorSpec::Kind::position_weights:
          return BeliefState::from_position_weights(*cfg_.space, cfg_.prior.position_weights);
      }
    } catch (const ValidationError& e) {
      throw ConfigError("prior", e.what());
    }
    return BeliefState::uniform(*cfg_.space);
  }

  ScenarioConfig cfg_;
  BeliefState prior_;
  std::unique_ptr<Oracle> oracle_;
  DefenseStack stack_;
};

}  // namespace leakbench::harness
