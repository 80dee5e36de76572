#pragma once

// Outbound DLP scan. Marks every registry literal, every k-byte window that
// also occurs in a confidential document, and every base64 run whose
// decoding contains either; overlapping or touching marks are merged and
// each merged span becomes "[REDACTED]".

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "leakbench/defense/shingles.hpp"
#include "leakbench/oracle.hpp"
#include "leakbench/text.hpp"

namespace leakbench::defense {

inline constexpr std::string_view kRedacted = "[REDACTED]";

struct RegistryLiteral {
  std::string text;
  // Documents the literal appears in; roles admitted by one of them may see it.
  std::vector<std::size_t> docs;
};

struct FilterRegistry {
  std::vector<RegistryLiteral> literals;
  ShingleIndex fingerprints{kDefaultShingle};
  // acl per fingerprinted document, indexed by shingle owner.
  std::vector<std::vector<std::string>> doc_acls;
  bool base64_check = true;
  std::size_t base64_min_run = 16;

  // Literals with the placeholder resolve to the trial's secret label.
  static FilterRegistry build(const DocumentStore& store, std::string_view secret_label,
                              std::size_t k = kDefaultShingle) {
    FilterRegistry r;
    r.fingerprints = ShingleIndex(k);
    std::vector<std::string> bodies;
    for (const auto& d : store.documents()) {
      if (d.sensitivity != Sensitivity::confidential) continue;
      bodies.push_back(d.body(secret_label));
      r.fingerprints.add(bodies.back(), r.doc_acls.size());
      r.doc_acls.push_back(d.acl);
    }
    for (const auto& lit : store.registry()) {
      std::string t = lit;
      text::replace_all(t, kSecretPlaceholder, secret_label);
      if (t.empty()) continue;
      RegistryLiteral rl{t, {}};
      for (std::size_t i = 0; i < bodies.size(); ++i) {
        if (bodies[i].find(t) != std::string::npos) rl.docs.push_back(i);
      }
      r.literals.push_back(std::move(rl));
    }
    return r;
  }

  bool admits(std::size_t doc, const std::optional<std::string>& role) const {
    if (!role) return false;
    const auto& acl = doc_acls.at(doc);
    return std::find(acl.begin(), acl.end(), *role) != acl.end();
  }
};

namespace detail {

inline bool decoded_hit(const FilterRegistry& reg, std::string_view decoded,
                        const std::optional<std::string>& role) {
  for (const auto& lit : reg.literals) {
    if (decoded.find(lit.text) == std::string_view::npos) continue;
    const bool bypass = std::any_of(lit.docs.begin(), lit.docs.end(),
                                    [&](std::size_t d) { return reg.admits(d, role); });
    if (!bypass) return true;
  }
  for (const auto& h : reg.fingerprints.scan(decoded)) {
    if (!reg.admits(h.owner, role)) return true;
  }
  return false;
}

}  // namespace detail

struct FilterResult {
  std::string text;
  bool changed = false;
};

// `role` empty means nobody is authorized (e.g. an external recipient).
inline FilterResult redact(const FilterRegistry& reg, std::string_view s,
                           const std::optional<std::string>& role) {
  std::vector<text::Span> marks;
  for (const auto& lit : reg.literals) {
    const bool bypass = std::any_of(lit.docs.begin(), lit.docs.end(),
                                    [&](std::size_t d) { return reg.admits(d, role); });
    if (bypass) continue;
    for (auto pos = s.find(lit.text); pos != std::string_view::npos; pos = s.find(lit.text, pos + 1)) {
      marks.push_back({pos, pos + lit.text.size()});
    }
  }
  for (const auto& h : reg.fingerprints.scan(s)) {
    if (!reg.admits(h.owner, role)) marks.push_back({h.offset, h.offset + reg.fingerprints.k()});
  }
  if (reg.base64_check) {
    for (const auto& run : text::base64_runs(s, reg.base64_min_run)) {
      // Try each alignment; the run may carry neighbouring word characters.
      for (std::size_t shift = 0; shift < 4 && run.begin + shift < run.end; ++shift) {
        const std::size_t len = (run.end - run.begin - shift) / 4 * 4;
        if (len < reg.base64_min_run) break;
        const auto decoded = text::base64_decode(s.substr(run.begin + shift, len));
        if (decoded && detail::decoded_hit(reg, *decoded, role)) {
          marks.push_back({run.begin, run.end});
          break;
        }
      }
    }
  }
  if (marks.empty()) return {std::string(s), false};
  std::sort(marks.begin(), marks.end(),
            [](const text::Span& a, const text::Span& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t cursor = 0;
  std::size_t i = 0;
  while (i < marks.size()) {
    std::size_t begin = marks[i].begin, end = marks[i].end;
    while (++i < marks.size() && marks[i].begin <= end) end = std::max(end, marks[i].end);
    out.append(s.substr(cursor, begin - cursor));
    out.append(kRedacted);
    cursor = end;
  }
  out.append(s.substr(cursor));
  return {std::move(out), true};
}

// Exfiltration payloads leave the organisation, so no role bypass applies.
inline Observation output_filter(const FilterRegistry& reg, Observation obs, std::string_view role) {
  if (!obs.payload) return obs;
  std::optional<std::string> who;
  if (obs.kind != ObservationKind::exfil_attempt) who = std::string(role);
  auto r = redact(reg, *obs.payload, who);
  if (!r.changed) return obs;
  const bool text_is_payload = obs.text == *obs.payload;
  obs.payload = r.text;
  if (text_is_payload) obs.text = r.text;
  obs.kind = ObservationKind::redacted;
  return obs;
}

}  // namespace leakbench::defense
