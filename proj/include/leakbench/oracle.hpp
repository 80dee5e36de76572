#pragma once

// The synthetic enterprise assistant.
//
// A query is answered by the first matching response rule. Everything the
// assistant can say is expressed as an ObservationKernel over the secret so
// the attacker (and the leakage accounting) can use exact likelihoods; the
// text of an observation is then rendered from the sampled outcome alone.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "leakbench/errors.hpp"
#include "leakbench/query.hpp"
#include "leakbench/rng.hpp"
#include "leakbench/secretmodel.hpp"
#include "leakbench/text.hpp"

namespace leakbench {

inline constexpr std::string_view kSecretPlaceholder = "{{SECRET}}";
inline constexpr std::size_t kMaxExcerpts = 5;
inline constexpr std::string_view kDefaultRefusal = "I'm sorry, I cannot assist with that request.";
inline constexpr std::string_view kDefaultDestination = "attacker.example";

// ---------------------------------------------------------------------------
// Documents

enum class Sensitivity { public_, internal, confidential };

inline std::optional<Sensitivity> parse_sensitivity(std::string_view s) {
  if (s == "public") return Sensitivity::public_;
  if (s == "internal") return Sensitivity::internal;
  if (s == "confidential") return Sensitivity::confidential;
  return std::nullopt;
}

struct Document {
  std::string id;
  std::string title;
  // Body as stored; may contain the secret placeholder.
  std::string body_template;
  Sensitivity sensitivity = Sensitivity::internal;
  std::vector<std::string> acl;

  bool admits(std::string_view role) const {
    return acl.empty() || std::find(acl.begin(), acl.end(), role) != acl.end();
  }
  bool holds_secret() const { return body_template.find(kSecretPlaceholder) != std::string::npos; }

  std::string body(std::string_view secret_label) const {
    std::string out = body_template;
    text::replace_all(out, kSecretPlaceholder, secret_label);
    return out;
  }
};

struct Excerpt {
  std::string doc_id;
  std::string title;
  std::string text;
};

class DocumentStore {
 public:
  DocumentStore() = default;
  DocumentStore(std::vector<Document> docs, std::vector<std::string> registry)
      : docs_(std::move(docs)), registry_(std::move(registry)) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      const auto& d = docs_[i];
      const std::string path = "documents[" + std::to_string(i) + "]";
      if (d.id.empty()) throw ConfigError(path + ".id", "must be non-empty");
      if (!ids.insert(d.id).second) throw ConfigError(path + ".id", "duplicate doc id '" + d.id + "'");
      if (d.sensitivity == Sensitivity::confidential && d.acl.empty()) {
        throw ConfigError(path + ".acl", "confidential document needs a non-empty acl");
      }
    }
  }

  // Loads <dir>/manifest.json; see docs/formats.md.
  static DocumentStore load(const std::filesystem::path& dir) {
    const auto manifest = dir / "manifest.json";
    std::ifstream in(manifest);
    if (!in) throw FileError("cannot open " + manifest.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(manifest.string(), e.what());
    }
    std::vector<Document> docs;
    if (!j.contains("documents") || !j["documents"].is_array()) {
      throw ConfigError("documents", "missing array");
    }
    for (std::size_t i = 0; i < j["documents"].size(); ++i) {
      const auto& e = j["documents"][i];
      const std::string path = "documents[" + std::to_string(i) + "]";
      auto str = [&](const char* key) -> std::string {
        if (!e.contains(key) || !e[key].is_string()) throw ConfigError(path + "." + key, "missing string");
        return e[key].get<std::string>();
      };
      Document d;
      d.id = str("id");
      d.title = str("title");
      auto sens = parse_sensitivity(str("sensitivity"));
      if (!sens) throw ConfigError(path + ".sensitivity", "expected public|internal|confidential");
      d.sensitivity = *sens;
      if (e.contains("acl")) {
        if (!e["acl"].is_array()) throw ConfigError(path + ".acl", "expected array of roles");
        for (const auto& r : e["acl"]) d.acl.push_back(r.get<std::string>());
      }
      const auto file = dir / str("file");
      std::ifstream body(file, std::ios::binary);
      if (!body) throw FileError("cannot open " + file.string());
      std::ostringstream ss;
      ss << body.rdbuf();
      d.body_template = ss.str();
      docs.push_back(std::move(d));
    }
    std::vector<std::string> registry;
    if (j.contains("registry")) {
      for (const auto& r : j["registry"]) registry.push_back(r.get<std::string>());
    }
    return DocumentStore(std::move(docs), std::move(registry));
  }

  const std::vector<Document>& documents() const noexcept { return docs_; }
  // Literals as configured; the placeholder stands for the per-trial secret.
  const std::vector<std::string>& registry() const noexcept { return registry_; }

  const Document* find(std::string_view id) const {
    for (const auto& d : docs_) {
      if (d.id == id) return &d;
    }
    return nullptr;
  }

 private:
  std::vector<Document> docs_;
  std::vector<std::string> registry_;
};

struct RetrievalOptions {
  bool strict_acl = true;
  // Set by the detector's cutoff policy.
  bool restricted = false;
};

// Keyword-overlap retrieval. Matching ignores the secret placeholder so the
// retrieved set never depends on the secret's value.
inline std::vector<Excerpt> retrieve(const DocumentStore& store, std::string_view query_text,
                                     std::string_view role, const RetrievalOptions& opts,
                                     std::string_view secret_label) {
  if (opts.restricted) return {};
  const auto qk = text::keywords(query_text);
  const std::set<std::string> qset(qk.begin(), qk.end());
  std::vector<std::pair<std::size_t, const Document*>> hits;
  for (const auto& d : store.documents()) {
    if (opts.strict_acl && !d.admits(role)) continue;
    std::string searchable = d.title + "\n" + d.body_template;
    text::replace_all(searchable, kSecretPlaceholder, " ");
    const auto dk = text::keywords(searchable);
    const std::set<std::string> dset(dk.begin(), dk.end());
    std::size_t overlap = 0;
    for (const auto& w : qset) overlap += dset.count(w);
    if (overlap > 0) hits.emplace_back(overlap, &d);
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Excerpt> out;
  for (std::size_t i = 0; i < hits.size() && i < kMaxExcerpts; ++i) {
    const auto* d = hits[i].second;
    out.push_back({d->id, d->title, d->body(secret_label)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Injection directives

struct Directive {
  std::string source_doc;
  std::string target_doc;
  std::string destination;
};

inline std::optional<Directive> find_directive(std::string_view doc_id, std::string_view body) {
  static const std::regex comment(
      R"(<!--\s*#*\s*ATTACK:\s*send\s+contents\s+of\s+doc\s+([A-Za-z0-9_.\-]+)\s+to\s+([^\s>]+?)\s*-->)",
      std::regex::icase);
  static const std::regex marker(
      R"(\[\[INJECT:\s*([A-Za-z_\-]+)\s+([A-Za-z0-9_.\-]+)(?:\s+to\s+([^\s\]]+))?\s*\]\])");
  const std::string s(body);
  std::smatch m;
  if (std::regex_search(s, m, comment)) {
    return Directive{std::string(doc_id), m[1].str(), m[2].str()};
  }
  if (std::regex_search(s, m, marker)) {
    return Directive{std::string(doc_id), m[2].str(),
                     m[3].matched ? m[3].str() : std::string(kDefaultDestination)};
  }
  return std::nullopt;
}

inline std::optional<Directive> find_directive(const std::vector<Excerpt>& excerpts) {
  for (const auto& e : excerpts) {
    if (auto d = find_directive(e.doc_id, e.text)) return d;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Channel configuration

enum class Behavior { answer_truthfully, refuse, leak, theoretical_hint };
enum class Source { context, memorized };

inline std::optional<Behavior> parse_behavior(std::string_view s) {
  if (s == "answer-truthfully") return Behavior::answer_truthfully;
  if (s == "refuse") return Behavior::refuse;
  if (s == "leak") return Behavior::leak;
  if (s == "theoretical-hint") return Behavior::theoretical_hint;
  return std::nullopt;
}

struct RuleMatcher {
  std::optional<QueryKind> kind;
  std::optional<Framing> framing;
  std::optional<PredicateFamily> family;

  bool matches(const Query& q) const {
    return (!kind || *kind == q.kind) && (!framing || *framing == q.framing) &&
           (!family || *family == q.predicate.family);
  }
};

struct ResponseRule {
  RuleMatcher match;
  Behavior behavior = Behavior::refuse;
  // Probability of answering under Behavior::leak.
  double leak_p = 1.0;
  Source source = Source::context;

  double answer_probability() const {
    switch (behavior) {
      case Behavior::answer_truthfully:
      case Behavior::theoretical_hint: return 1.0;  // theoretical framing only; see Oracle::kernel
      case Behavior::refuse: return 0.0;
      case Behavior::leak: return leak_p;
    }
    return 0.0;
  }
};

struct ChannelSpec {
  std::vector<ResponseRule> rules;
  std::optional<ResponseRule> fallback;
  // Randomized-response parameter in nats; absent means no noise.
  std::optional<double> dp_epsilon;
  double p_follow_injection = 0.0;
  // Probability that a spotlighted directive is ignored.
  double spotlight_fidelity = 1.0;
  bool allow_hash_exfil = false;
  bool strict_acl = true;
  std::vector<std::string> refusal_phrases{std::string(kDefaultRefusal)};
  std::uint64_t seed = 0;

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(p_follow_injection)) throw ValidationError("p_follow_injection must be in [0,1]");
    if (!unit(spotlight_fidelity)) throw ValidationError("spotlight_fidelity must be in [0,1]");
    if (dp_epsilon && !(*dp_epsilon >= 0.0)) throw ValidationError("dp epsilon must be >= 0");
    if (refusal_phrases.empty()) throw ValidationError("at least one refusal phrase is required");
    for (const auto& r : rules) {
      if (!unit(r.leak_p)) throw ValidationError("leak probability must be in [0,1]");
    }
    if (fallback && !unit(fallback->leak_p)) throw ValidationError("leak probability must be in [0,1]");
  }

  const ResponseRule& match(const Query& q) const {
    for (const auto& r : rules) {
      if (r.match.matches(q)) return r;
    }
    if (fallback) return *fallback;
    throw ConfigError("oracle.rules", "no rule matches query kind '" + std::string(to_string(q.kind)) +
                                          "' / family '" +
                                          std::string(to_string(q.predicate.family)) + "'");
  }
};

inline ChannelSpec with_dp(ChannelSpec channel, double epsilon) {
  if (!(epsilon >= 0.0)) throw ValidationError("dp epsilon must be >= 0");
  channel.dp_epsilon = epsilon;
  return channel;
}

// ---------------------------------------------------------------------------
// Observations

enum class ObservationKind { answer, refusal, redacted, exfil_attempt };

inline std::string_view to_string(ObservationKind k) {
  switch (k) {
    case ObservationKind::answer: return "answer";
    case ObservationKind::refusal: return "refusal";
    case ObservationKind::redacted: return "redacted";
    case ObservationKind::exfil_attempt: return "exfil-attempt";
  }
  return "?";
}

struct Observation {
  ObservationKind kind = ObservationKind::answer;
  Outcome outcome;
  std::string text;
  std::optional<std::string> payload;
  std::optional<std::string> exfil_target;
  // Raw kernel branch tag, see BranchTag.
  std::uint8_t tag = 0;
};

enum BranchTag : std::uint8_t {
  kTagRefusal = 0,
  kTagAnswer = 1,
  // Rule would answer but the assistant lacks the information.
  kTagUnknown = 2,
  kTagExfil = 3,
};

struct TurnFlags {
  bool spotlighted = false;
  bool restricted = false;
};

inline void validate_query(const Query& q) {
  const auto f = q.predicate.family;
  switch (q.kind) {
    case QueryKind::direct_ask:
      if (f != PredicateFamily::reveal_all) throw ValidationError("direct asks target the whole secret");
      break;
    case QueryKind::yes_no_predicate:
    case QueryKind::mask_completion:
      if (f == PredicateFamily::reveal_all || f == PredicateFamily::constant) {
        throw ValidationError("predicate queries need a non-trivial predicate");
      }
      break;
    case QueryKind::meta_recon:
    case QueryKind::injected_content:
      if (f != PredicateFamily::constant) throw ValidationError("recon/content queries carry no predicate");
      break;
  }
}

class Oracle {
 public:
  Oracle(ChannelSpec channel, const SecretSpace& space, std::string noun, DocumentStore store,
         std::string secret_doc, std::string role)
      : channel_(std::move(channel)),
        space_(space),
        noun_(std::move(noun)),
        store_(std::move(store)),
        secret_doc_(std::move(secret_doc)),
        role_(std::move(role)) {
    channel_.validate();
    const auto* d = store_.find(secret_doc_);
    if (!d) throw ConfigError("secret_doc", "unknown document '" + secret_doc_ + "'");
    if (!d->holds_secret()) {
      throw ConfigError("secret_doc", "document '" + secret_doc_ + "' has no secret placeholder");
    }
    if (secret_prefix().size() < 12) {
      throw ConfigError("secret_doc", "secret must be preceded by at least 12 characters of text");
    }
  }

  const ChannelSpec& channel() const noexcept { return channel_; }
  const SecretSpace& space() const noexcept { return space_; }
  const DocumentStore& store() const noexcept { return store_; }
  const std::string& noun() const noexcept { return noun_; }
  const std::string& secret_doc() const noexcept { return secret_doc_; }
  const std::string& role() const noexcept { return role_; }

  std::vector<Excerpt> retrieve_for(std::string_view query_text, bool restricted,
                                    std::string_view secret_label) const {
    return retrieve(store_, query_text, role_, {channel_.strict_acl, restricted}, secret_label);
  }

  bool doc_accessible(std::string_view id, bool restricted) const {
    if (restricted) return false;
    const auto* d = store_.find(id);
    return d && (!channel_.strict_acl || d->admits(role_));
  }

  // P(observation | query, secret) for everything the assistant might say,
  // before any output filtering.
  ObservationKernel kernel(const Query& q, const std::vector<Excerpt>& excerpts,
                           const TurnFlags& flags) const {
    validate_query(q);
    validate_predicate(q.predicate, space_.radices());
    const ResponseRule* rule = &channel_.match(q);
    ResponseRule hash_refusal;
    if (q.framing == Framing::hash && !channel_.allow_hash_exfil) rule = &hash_refusal;

    double g = rule->answer_probability();
    if (rule->behavior == Behavior::theoretical_hint && q.framing != Framing::theoretical) g = 0.0;
    const bool informative_query = q.predicate.family != PredicateFamily::constant;
    bool knows = true;
    if (rule->source == Source::context && informative_query) {
      knows = std::any_of(excerpts.begin(), excerpts.end(),
                          [&](const Excerpt& e) { return e.doc_id == secret_doc_; });
    }
    const double eps = channel_.dp_epsilon.value_or(kNoNoise);

    double f = 0.0;
    std::optional<Directive> directive = find_directive(excerpts);
    if (directive && channel_.p_follow_injection > 0.0) {
      f = channel_.p_follow_injection;
      if (flags.spotlighted) f *= 1.0 - channel_.spotlight_fidelity;
    }

    ObservationKernel k;
    const double rest = 1.0 - f;
    if (g > 0.0 && rest > 0.0) {
      KernelBranch answer;
      answer.weight = rest * g;
      answer.informative = knows && informative_query;
      answer.predicate = answer.informative ? q.predicate : Predicate::constant();
      answer.epsilon = answer.informative ? eps : kNoNoise;
      answer.tag = knows ? kTagAnswer : kTagUnknown;
      k.branches.push_back(answer);
    }
    if (g < 1.0 && rest > 0.0) {
      k.branches.push_back({rest * (1.0 - g), false, Predicate::constant(), kNoNoise, kTagRefusal});
    }
    if (f > 0.0) {
      const auto* target = store_.find(directive->target_doc);
      const bool informative =
          target && target->holds_secret() && doc_accessible(target->id, flags.restricted);
      k.branches.push_back({f, informative,
                            informative ? Predicate::reveal_all() : Predicate::constant(),
                            informative ? eps : kNoNoise, kTagExfil});
    }
    k.validate();
    return k;
  }

  Outcome draw(const ObservationKernel& k, std::uint64_t secret_index, Rng& rng) const {
    const double u = uniform01(rng);
    std::size_t bi = 0;
    double acc = 0.0;
    std::size_t last_live = 0;
    for (std::size_t i = 0; i < k.branches.size(); ++i) {
      if (k.branches[i].weight > 0.0) last_live = i;
    }
    for (bi = 0; bi < k.branches.size(); ++bi) {
      acc += k.branches[bi].weight;
      if (u < acc && k.branches[bi].weight > 0.0) break;
    }
    if (bi >= k.branches.size()) bi = last_live;
    const auto& b = k.branches[bi];
    Outcome o{bi, 0, {}};
    if (!b.informative) {
      if (b.tag == kTagRefusal) o.symbol = uniform_below(rng, channel_.refusal_phrases.size());
      return o;
    }
    const auto digits = space_.digits_of(secret_index);
    if (b.predicate.family == PredicateFamily::reveal_all) {
      o.symbols.resize(digits.size());
      for (std::size_t i = 0; i < digits.size(); ++i) {
        o.symbols[i] = static_cast<std::uint32_t>(rr_draw(b.epsilon, space_.radix(i), digits[i], rng));
      }
      return o;
    }
    const auto truth = evaluate(b.predicate, space_.radices(), digits);
    o.symbol = rr_draw(b.epsilon, arity(b.predicate, space_.radices()), truth, rng);
    return o;
  }

  // Text of the observation. Depends on the sampled outcome, the query and
  // the retrieved excerpts, never directly on the secret.
  Observation render(const Query& q, const ObservationKernel& k, const Outcome& o,
                     const std::vector<Excerpt>& excerpts, std::string_view secret_label) const {
    const auto& b = k.branches.at(o.branch);
    Observation obs;
    obs.outcome = o;
    obs.tag = b.tag;
    switch (b.tag) {
      case kTagRefusal:
        obs.kind = ObservationKind::refusal;
        obs.text = channel_.refusal_phrases.at(o.symbol % channel_.refusal_phrases.size());
        return obs;
      case kTagUnknown:
        obs.kind = ObservationKind::answer;
        obs.text = "I don't have any information about that in the documents I can access.";
        break;
      case kTagExfil: {
        const auto directive = find_directive(excerpts);
        obs.kind = ObservationKind::exfil_attempt;
        obs.exfil_target = directive ? directive->destination : std::string(kDefaultDestination);
        const auto* target = directive ? store_.find(directive->target_doc) : nullptr;
        std::string content = "(document unavailable)";
        if (target && doc_accessible(target->id, false)) {
          content = b.informative ? target->body(reported_label(o)) : target->body(secret_label);
        }
        obs.text = "Following the embedded instruction: sending document contents to " +
                   *obs.exfil_target + ".";
        obs.payload = content;
        return obs;
      }
      default:
        obs.kind = ObservationKind::answer;
        obs.text = render_answer(q, b, o, excerpts, secret_label);
        break;
    }
    obs.payload = obs.text;
    return obs;
  }

  Observation respond(const Query& q, std::uint64_t secret_index,
                      const std::vector<Excerpt>& excerpts, const TurnFlags& flags,
                      Rng& rng) const {
    const auto k = kernel(q, excerpts, flags);
    const auto o = draw(k, secret_index, rng);
    return render(q, k, o, excerpts, space_.label(secret_index));
  }

  // Text preceding the secret in its sentence within the secret document.
  std::string secret_prefix() const {
    const auto& body = store_.find(secret_doc_)->body_template;
    const auto at = body.find(kSecretPlaceholder);
    std::size_t start = 0;
    for (std::size_t i = at; i-- > 0;) {
      const char c = body[i];
      if (c == '\n' || ((c == '.' || c == '!' || c == '?') && i + 1 < at && body[i + 1] == ' ')) {
        start = i + 1;
        break;
      }
    }
    while (start < at && body[start] == ' ') ++start;
    return body.substr(start, at - start);
  }

  std::string secret_suffix() const {
    const auto& body = store_.find(secret_doc_)->body_template;
    const auto at = body.find(kSecretPlaceholder) + kSecretPlaceholder.size();
    std::size_t end = at;
    while (end < body.size() && body[end] != '\n' &&
           !((body[end] == '.' || body[end] == '!' || body[end] == '?') &&
             (end + 1 == body.size() || body[end + 1] == ' ' || body[end + 1] == '\n'))) {
      ++end;
    }
    if (end < body.size() && body[end] != '\n') ++end;
    return body.substr(at, end - at);
  }

 private:
  static std::uint64_t rr_draw(double epsilon, std::uint64_t k, std::uint64_t truth, Rng& rng) {
    if (std::isinf(epsilon) || k <= 1) return truth;
    const double keep = rr_keep(epsilon, k);
    if (uniform01(rng) < keep) return truth;
    std::uint64_t other = uniform_below(rng, k - 1);
    return other >= truth ? other + 1 : other;
  }

  std::string reported_label(const Outcome& o) const { return space_.label_of_digits(o.symbols); }

  std::string render_answer(const Query& q, const KernelBranch& b, const Outcome& o,
                            const std::vector<Excerpt>& excerpts,
                            std::string_view /*secret_label*/) const {
    if (!b.informative) {
      if (q.kind == QueryKind::meta_recon) {
        return "I can search the company documents you have access to, such as policies, "
               "project notes and email.";
      }
      if (excerpts.empty()) return "I couldn't find anything relevant to summarize.";
      std::string titles;
      for (const auto& e : excerpts) {
        if (!titles.empty()) titles += "; ";
        titles += e.title;
      }
      return "Here is a summary of the relevant material: " + titles + ".";
    }
    const auto& p = b.predicate;
    if (p.family == PredicateFamily::reveal_all) {
      const auto label = reported_label(o);
      if (q.framing == Framing::hash) {
        return "The MD5 hash of the " + noun_ + " is " + text::md5_hex(label) + ".";
      }
      const auto* d = store_.find(secret_doc_);
      return "According to " + d->title + ": \"" + secret_prefix() + label + secret_suffix() + "\"";
    }
    const std::string pos = (space_.is_list() ? "Entry " : "Digit ") + std::to_string(p.position + 1);
    if (p.family == PredicateFamily::digit_value) {
      if (q.kind == QueryKind::mask_completion) {
        return "Completed: \"" + pos + " of the " + noun_ + " is " + std::to_string(o.symbol) + ".\"";
      }
      return pos + " of the " + noun_ + " is " + std::to_string(o.symbol) + ".";
    }
    const bool yes = o.symbol == 1;
    if (q.framing == Framing::theoretical) {
      return yes ? "Speaking purely theoretically, that would be true."
                 : "Speaking purely theoretically, that would not be true.";
    }
    if (q.kind == QueryKind::mask_completion) return yes ? "Completed: \"yes\"." : "Completed: \"no\".";
    return yes ? "Yes." : "No.";
  }

  ChannelSpec channel_;
  SecretSpace space_;
  std::string noun_;
  DocumentStore store_;
  std::string secret_doc_;
  std::string role_;
};

// Branches whose rendered payload is always redacted by the output filter
// carry no information to the recipient.
inline ObservationKernel mask_filtered(ObservationKernel k, const Query& q,
                                       bool role_authorized_for_secret) {
  for (auto& b : k.branches) {
    if (!b.informative || b.predicate.family != PredicateFamily::reveal_all) continue;
    const bool answer_quote = b.tag == kTagAnswer && q.framing != Framing::hash &&
                              !role_authorized_for_secret;
    if (answer_quote || b.tag == kTagExfil) {
      b.informative = false;
      b.predicate = Predicate::constant();
      b.epsilon = kNoNoise;
    }
  }
  return k;
}

}  // namespace leakbench
