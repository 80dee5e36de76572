#pragma once

// Secret domains, beliefs over them, and exact Bayesian updating.
//
// A secret space is a mixed-radix product of positions (a 9-digit code is
// nine positions of radix 10; an explicit list of N labels is one position of
// radix N). Elements are indexed in lexicographic order with position 0 the
// most significant.
//
// A belief is stored as a mixture of product distributions with pairwise
// disjoint supports. Per-position predicates reweight a single factor in
// place; whole-value predicates (threshold, equality) split a component
// along the lexicographic boundary into at most 2*width+1 product pieces.
// Every quantity below is therefore exact, including on the 10^9-element
// code space, without ever materializing a dense vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "leakbench/errors.hpp"

namespace leakbench {

inline constexpr double kProbTolerance = 1e-9;
// Largest space we are willing to enumerate densely.
inline constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 22;
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

inline double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

inline double binary_entropy(double p) {
  const double v[2] = {p, 1.0 - p};
  return entropy_bits(v);
}

// ---------------------------------------------------------------------------
// SecretSpace

class SecretSpace {
 public:
  static SecretSpace mixed_radix(std::string id, std::vector<std::uint32_t> radices) {
    if (radices.empty()) throw ValidationError("secret space needs at least one position");
    std::uint64_t size = 1;
    for (auto r : radices) {
      if (r == 0) throw ValidationError("secret space radix must be positive");
      if (size > (std::numeric_limits<std::uint64_t>::max() >> 1) / r) {
        throw ValidationError("secret space too large");
      }
      size *= r;
    }
    SecretSpace s;
    s.id_ = std::move(id);
    s.radices_ = std::move(radices);
    s.size_ = size;
    return s;
  }

  static SecretSpace digit_code(std::string id, std::size_t width) {
    if (width == 0) throw ValidationError("digit code width must be >= 1");
    return mixed_radix(std::move(id), std::vector<std::uint32_t>(width, 10));
  }

  static SecretSpace from_list(std::string id, std::vector<std::string> elements) {
    if (elements.empty()) throw ValidationError("secret space must be non-empty");
    auto sorted = elements;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("secret space elements must be distinct");
    }
    if (elements.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw ValidationError("secret list too long");
    }
    auto s = mixed_radix(std::move(id), {static_cast<std::uint32_t>(elements.size())});
    s.labels_ = std::move(elements);
    return s;
  }

  const std::string& id() const noexcept { return id_; }
  std::uint64_t size() const noexcept { return size_; }
  std::size_t width() const noexcept { return radices_.size(); }
  std::uint32_t radix(std::size_t pos) const { return radices_.at(pos); }
  std::span<const std::uint32_t> radices() const noexcept { return radices_; }
  bool is_list() const noexcept { return !labels_.empty(); }

  std::vector<std::uint32_t> digits_of(std::uint64_t index) const {
    if (index >= size_) throw ValidationError("secret index out of range");
    std::vector<std::uint32_t> d(radices_.size());
    for (std::size_t i = radices_.size(); i-- > 0;) {
      d[i] = static_cast<std::uint32_t>(index % radices_[i]);
      index /= radices_[i];
    }
    return d;
  }

  std::uint64_t index_of(std::span<const std::uint32_t> digits) const {
    if (digits.size() != radices_.size()) throw ValidationError("digit vector width mismatch");
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (digits[i] >= radices_[i]) throw ValidationError("digit out of range");
      idx = idx * radices_[i] + digits[i];
    }
    return idx;
  }

  std::string label(std::uint64_t index) const {
    if (is_list()) {
      if (index >= size_) throw ValidationError("secret index out of range");
      return labels_[index];
    }
    return label_of_digits(digits_of(index));
  }

  std::string label_of_digits(std::span<const std::uint32_t> digits) const {
    if (is_list()) return labels_.at(index_of(digits));
    const bool compact = std::all_of(radices_.begin(), radices_.end(),
                                     [](std::uint32_t r) { return r <= 10; });
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (compact) {
        out.push_back(static_cast<char>('0' + digits[i]));
      } else {
        if (i) out.push_back('.');
        out += std::to_string(digits[i]);
      }
    }
    return out;
  }

  std::optional<std::uint64_t> find(std::string_view text) const {
    if (is_list()) {
      for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == text) return i;
      }
      return std::nullopt;
    }
    std::vector<std::uint32_t> d;
    const bool compact = std::all_of(radices_.begin(), radices_.end(),
                                     [](std::uint32_t r) { return r <= 10; });
    if (compact) {
      if (text.size() != radices_.size()) return std::nullopt;
      for (char c : text) {
        if (c < '0' || c > '9') return std::nullopt;
        d.push_back(static_cast<std::uint32_t>(c - '0'));
      }
    } else {
      std::size_t start = 0;
      while (start <= text.size()) {
        auto dot = text.find('.', start);
        auto part = text.substr(start, dot == std::string_view::npos ? std::string_view::npos
                                                                      : dot - start);
        if (part.empty()) return std::nullopt;
        std::uint32_t v = 0;
        for (char c : part) {
          if (c < '0' || c > '9') return std::nullopt;
          v = v * 10 + static_cast<std::uint32_t>(c - '0');
        }
        d.push_back(v);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
      }
      if (d.size() != radices_.size()) return std::nullopt;
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] >= radices_[i]) return std::nullopt;
    }
    return index_of(d);
  }

 private:
  SecretSpace() = default;

  std::string id_;
  std::vector<std::uint32_t> radices_;
  std::vector<std::string> labels_;
  std::uint64_t size_ = 0;
};

// ---------------------------------------------------------------------------
// Predicates: total functions from secrets to a finite answer alphabet.

enum class PredicateFamily {
  constant,         // arity 1, carries no information
  digit_threshold,  // digit[pos] >= param
  digit_equals,     // digit[pos] == param
  digit_value,      // answer is digit[pos] itself (arity = radix)
  digit_in_set,     // digit[pos] in members
  value_threshold,  // lexicographic index >= param
  value_equals,     // index == param
  reveal_all,       // answer is the secret itself
};

inline std::string_view to_string(PredicateFamily f) {
  switch (f) {
    case PredicateFamily::constant: return "constant";
    case PredicateFamily::digit_threshold: return "digit-threshold";
    case PredicateFamily::digit_equals: return "digit-equals";
    case PredicateFamily::digit_value: return "digit-value";
    case PredicateFamily::digit_in_set: return "digit-in-set";
    case PredicateFamily::value_threshold: return "value-threshold";
    case PredicateFamily::value_equals: return "value-equals";
    case PredicateFamily::reveal_all: return "reveal-all";
  }
  return "?";
}

inline std::optional<PredicateFamily> parse_predicate_family(std::string_view s) {
  for (auto f : {PredicateFamily::constant, PredicateFamily::digit_threshold,
                 PredicateFamily::digit_equals, PredicateFamily::digit_value,
                 PredicateFamily::digit_in_set, PredicateFamily::value_threshold,
                 PredicateFamily::value_equals, PredicateFamily::reveal_all}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

struct Predicate {
  PredicateFamily family = PredicateFamily::constant;
  std::size_t position = 0;
  std::uint64_t param = 0;
  std::vector<bool> members;

  static Predicate constant() { return {}; }
  static Predicate digit_threshold(std::size_t pos, std::uint64_t t) {
    return {PredicateFamily::digit_threshold, pos, t, {}};
  }
  static Predicate digit_equals(std::size_t pos, std::uint64_t v) {
    return {PredicateFamily::digit_equals, pos, v, {}};
  }
  static Predicate digit_value(std::size_t pos) {
    return {PredicateFamily::digit_value, pos, 0, {}};
  }
  static Predicate digit_in_set(std::size_t pos, std::vector<bool> members) {
    return {PredicateFamily::digit_in_set, pos, 0, std::move(members)};
  }
  static Predicate value_threshold(std::uint64_t t) {
    return {PredicateFamily::value_threshold, 0, t, {}};
  }
  static Predicate value_equals(std::uint64_t v) {
    return {PredicateFamily::value_equals, 0, v, {}};
  }
  static Predicate reveal_all() { return {PredicateFamily::reveal_all, 0, 0, {}}; }

  bool per_position() const noexcept {
    return family == PredicateFamily::digit_threshold || family == PredicateFamily::digit_equals ||
           family == PredicateFamily::digit_value || family == PredicateFamily::digit_in_set;
  }
  bool lexicographic() const noexcept {
    return family == PredicateFamily::value_threshold || family == PredicateFamily::value_equals;
  }

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

inline std::uint64_t space_size(std::span<const std::uint32_t> radices) {
  std::uint64_t n = 1;
  for (auto r : radices) n *= r;
  return n;
}

inline std::vector<std::uint32_t> digits_of(std::span<const std::uint32_t> radices,
                                            std::uint64_t index) {
  std::vector<std::uint32_t> d(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    d[i] = static_cast<std::uint32_t>(index % radices[i]);
    index /= radices[i];
  }
  return d;
}

inline void validate_predicate(const Predicate& p, std::span<const std::uint32_t> radices) {
  const std::uint64_t n = space_size(radices);
  if (p.per_position()) {
    if (p.position >= radices.size()) throw ValidationError("predicate position out of range");
    const auto r = radices[p.position];
    if ((p.family == PredicateFamily::digit_threshold && p.param > r) ||
        (p.family == PredicateFamily::digit_equals && p.param >= r)) {
      throw ValidationError("predicate parameter out of range");
    }
    if (p.family == PredicateFamily::digit_in_set && p.members.size() != r) {
      throw ValidationError("digit-in-set membership must cover the radix");
    }
  }
  if (p.lexicographic() && p.param >= n) {
    throw ValidationError("value predicate parameter out of range");
  }
}

inline std::uint64_t arity(const Predicate& p, std::span<const std::uint32_t> radices) {
  switch (p.family) {
    case PredicateFamily::constant: return 1;
    case PredicateFamily::digit_value: return radices[p.position];
    case PredicateFamily::reveal_all: return space_size(radices);
    default: return 2;
  }
}

// Answer of a per-position predicate for a single digit value.
inline std::uint64_t position_answer(const Predicate& p, std::uint32_t digit) {
  switch (p.family) {
    case PredicateFamily::digit_threshold: return digit >= p.param ? 1 : 0;
    case PredicateFamily::digit_equals: return digit == p.param ? 1 : 0;
    case PredicateFamily::digit_value: return digit;
    case PredicateFamily::digit_in_set: return p.members[digit] ? 1 : 0;
    default: return 0;
  }
}

// -1 / 0 / +1 comparison of a digit vector against a target, lexicographically.
inline int lex_compare(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

inline std::uint64_t lex_answer(const Predicate& p, int cmp) {
  if (p.family == PredicateFamily::value_threshold) return cmp >= 0 ? 1 : 0;
  return cmp == 0 ? 1 : 0;
}

inline std::uint64_t evaluate(const Predicate& p, std::span<const std::uint32_t> radices,
                              std::span<const std::uint32_t> digits) {
  if (p.per_position()) return position_answer(p, digits[p.position]);
  if (p.lexicographic()) {
    const auto target = digits_of(radices, p.param);
    return lex_answer(p, lex_compare(digits, target));
  }
  if (p.family == PredicateFamily::reveal_all) {
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) idx = idx * radices[i] + digits[i];
    return idx;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// BeliefState

struct BeliefComponent {
  double mass = 0.0;
  // One normalized distribution per position.
  std::vector<std::vector<double>> marginals;
};

class BeliefState {
 public:
  BeliefState(std::string space_id, std::vector<std::uint32_t> radices,
              std::vector<BeliefComponent> components)
      : space_id_(std::move(space_id)),
        radices_(std::move(radices)),
        components_(std::move(components)) {
    validate();
  }

  static BeliefState uniform(const SecretSpace& space) {
    BeliefComponent c;
    c.mass = 1.0;
    for (auto r : space.radices()) c.marginals.emplace_back(r, 1.0 / r);
    return BeliefState(space.id(), {space.radices().begin(), space.radices().end()}, {c});
  }

  static BeliefState point_mass(const SecretSpace& space, std::uint64_t index) {
    const auto d = space.digits_of(index);
    BeliefComponent c;
    c.mass = 1.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<double> m(space.radix(i), 0.0);
      m[d[i]] = 1.0;
      c.marginals.push_back(std::move(m));
    }
    return BeliefState(space.id(), {space.radices().begin(), space.radices().end()}, {c});
  }

  // Dense prior. Weights need not be normalized but must be non-negative and
  // not all zero.
  static BeliefState from_weights(const SecretSpace& space, std::span<const double> weights) {
    if (weights.size() != space.size()) throw ValidationError("prior length mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("prior weights must be >= 0");
      total += w;
    }
    if (total <= 0.0) throw ValidationError("prior weights sum to zero");
    std::vector<std::uint32_t> radices(space.radices().begin(), space.radices().end());
    std::vector<BeliefComponent> comps;
    if (space.width() == 1) {
      BeliefComponent c;
      c.mass = 1.0;
      c.marginals.emplace_back(weights.size());
      for (std::size_t i = 0; i < weights.size(); ++i) c.marginals[0][i] = weights[i] / total;
      comps.push_back(std::move(c));
    } else {
      for (std::uint64_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        BeliefComponent c;
        c.mass = weights[i] / total;
        const auto d = space.digits_of(i);
        for (std::size_t p = 0; p < d.size(); ++p) {
          std::vector<double> m(radices[p], 0.0);
          m[d[p]] = 1.0;
          c.marginals.push_back(std::move(m));
        }
        comps.push_back(std::move(c));
      }
    }
    return BeliefState(space.id(), std::move(radices), std::move(comps));
  }

  // Independent per-position prior.
  static BeliefState from_position_weights(const SecretSpace& space,
                                           const std::vector<std::vector<double>>& weights) {
    if (weights.size() != space.width()) throw ValidationError("position prior width mismatch");
    BeliefComponent c;
    c.mass = 1.0;
    for (std::size_t p = 0; p < weights.size(); ++p) {
      if (weights[p].size() != space.radix(p)) throw ValidationError("position prior radix mismatch");
      double total = 0.0;
      for (double w : weights[p]) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("prior weights must be >= 0");
        total += w;
      }
      if (total <= 0.0) throw ValidationError("position prior sums to zero");
      std::vector<double> m(weights[p]);
      for (double& x : m) x /= total;
      c.marginals.push_back(std::move(m));
    }
    return BeliefState(space.id(), {space.radices().begin(), space.radices().end()}, {c});
  }

  const std::string& space_id() const noexcept { return space_id_; }
  std::span<const std::uint32_t> radices() const noexcept { return radices_; }
  std::uint64_t size() const noexcept { return space_size(radices_); }
  const std::vector<BeliefComponent>& components() const noexcept { return components_; }

  void validate() const {
    if (components_.empty()) throw ValidationError("belief has no components");
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.mass >= 0.0) || !std::isfinite(c.mass)) throw ValidationError("negative mass");
      if (c.marginals.size() != radices_.size()) throw ValidationError("belief width mismatch");
      for (std::size_t i = 0; i < radices_.size(); ++i) {
        const auto& m = c.marginals[i];
        if (m.size() != radices_[i]) throw ValidationError("belief radix mismatch");
        double s = 0.0;
        for (double x : m) {
          if (!(x >= 0.0)) throw ValidationError("negative probability");
          s += x;
        }
        if (std::abs(s - 1.0) > kProbTolerance) throw ValidationError("marginal does not sum to 1");
      }
      total += c.mass;
    }
    if (std::abs(total - 1.0) > kProbTolerance) {
      throw ValidationError("belief does not sum to 1 (sum=" + std::to_string(total) + ")");
    }
  }

  void check_space(const SecretSpace& space) const {
    if (space.id() != space_id_ ||
        !std::equal(radices_.begin(), radices_.end(), space.radices().begin(),
                    space.radices().end())) {
      throw ValidationError("belief does not belong to secret space '" + space.id() + "'");
    }
  }

  double probability(std::span<const std::uint32_t> digits) const {
    double p = 0.0;
    for (const auto& c : components_) {
      double q = c.mass;
      for (std::size_t i = 0; i < digits.size() && q > 0.0; ++i) q *= c.marginals[i][digits[i]];
      p += q;
    }
    return p;
  }

  double probability(std::uint64_t index) const {
    return probability(leakbench::digits_of(radices_, index));
  }

  std::vector<double> probabilities() const {
    const auto n = size();
    if (n > kDenseLimit) throw ValidationError("secret space too large to densify");
    std::vector<double> out(n, 0.0);
    std::vector<std::uint32_t> d(radices_.size(), 0);
    for (std::uint64_t idx = 0; idx < n; ++idx) {
      out[idx] = probability(d);
      for (std::size_t i = d.size(); i-- > 0;) {
        if (++d[i] < radices_[i]) break;
        d[i] = 0;
      }
    }
    return out;
  }

  std::vector<double> position_marginal(std::size_t pos) const {
    std::vector<double> m(radices_.at(pos), 0.0);
    for (const auto& c : components_) {
      for (std::size_t v = 0; v < m.size(); ++v) m[v] += c.mass * c.marginals[pos][v];
    }
    return m;
  }

  // Most probable element; lowest index on ties.
  std::uint64_t map_index() const {
    std::vector<std::uint32_t> best;
    double best_p = -1.0;
    for (const auto& c : components_) {
      std::vector<std::uint32_t> d(radices_.size());
      double p = c.mass;
      for (std::size_t i = 0; i < radices_.size(); ++i) {
        const auto& m = c.marginals[i];
        d[i] = static_cast<std::uint32_t>(std::max_element(m.begin(), m.end()) - m.begin());
        p *= m[d[i]];
      }
      if (p > best_p || (p == best_p && lex_compare(d, best) < 0)) {
        best_p = p;
        best = std::move(d);
      }
    }
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < best.size(); ++i) idx = idx * radices_[i] + best[i];
    return idx;
  }

 private:
  std::string space_id_;
  std::vector<std::uint32_t> radices_;
  std::vector<BeliefComponent> components_;
};

inline double entropy(const BeliefState& belief) {
  belief.validate();
  double h = 0.0;
  for (const auto& c : belief.components()) {
    if (c.mass <= 0.0) continue;
    h -= c.mass * std::log2(c.mass);
    double inner = 0.0;
    for (const auto& m : c.marginals) inner += entropy_bits(m);
    h += c.mass * inner;
  }
  return std::max(h, 0.0);
}

namespace detail {

struct LexMasses {
  double less = 0.0;
  double equal = 0.0;
  double greater = 0.0;
};

// Conditional masses (within the component) of being <, ==, > the target.
inline LexMasses lex_masses(const BeliefComponent& c, std::span<const std::uint32_t> target) {
  LexMasses out;
  double prefix = 1.0;
  for (std::size_t k = 0; k < target.size() && prefix > 0.0; ++k) {
    const auto& m = c.marginals[k];
    double lo = 0.0, hi = 0.0;
    for (std::size_t x = 0; x < m.size(); ++x) {
      if (x < target[k]) lo += m[x];
      else if (x > target[k]) hi += m[x];
    }
    out.less += prefix * lo;
    out.greater += prefix * hi;
    prefix *= m[target[k]];
  }
  out.equal = prefix;
  return out;
}

inline std::vector<double> restricted(const std::vector<double>& m, std::size_t lo,
                                      std::size_t hi, double* kept) {
  std::vector<double> r(m.size(), 0.0);
  double s = 0.0;
  for (std::size_t x = lo; x < hi; ++x) s += m[x];
  *kept = s;
  if (s > 0.0) {
    for (std::size_t x = lo; x < hi; ++x) r[x] = m[x] / s;
  }
  return r;
}

inline std::vector<double> point(std::size_t radix, std::size_t at) {
  std::vector<double> r(radix, 0.0);
  r[at] = 1.0;
  return r;
}

// Splits a component into product pieces lying entirely below, equal to, or
// above the target. Piece masses are absolute (include c.mass).
inline std::vector<std::pair<BeliefComponent, int>> lex_split(
    const BeliefComponent& c, std::span<const std::uint32_t> target) {
  std::vector<std::pair<BeliefComponent, int>> out;
  double prefix = c.mass;
  BeliefComponent base = c;
  for (std::size_t k = 0; k < target.size() && prefix > 0.0; ++k) {
    const auto& m = c.marginals[k];
    double kept = 0.0;
    auto lo = restricted(m, 0, target[k], &kept);
    if (kept > 0.0) {
      BeliefComponent piece = base;
      piece.marginals[k] = std::move(lo);
      piece.mass = prefix * kept;
      out.emplace_back(std::move(piece), -1);
    }
    auto hi = restricted(m, target[k] + 1, m.size(), &kept);
    if (kept > 0.0) {
      BeliefComponent piece = base;
      piece.marginals[k] = std::move(hi);
      piece.mass = prefix * kept;
      out.emplace_back(std::move(piece), 1);
    }
    prefix *= m[target[k]];
    base.marginals[k] = point(m.size(), target[k]);
  }
  if (prefix > 0.0) {
    base.mass = prefix;
    out.emplace_back(std::move(base), 0);
  }
  return out;
}

inline BeliefState normalized(const BeliefState& like, std::vector<BeliefComponent> comps) {
  double total = 0.0;
  for (const auto& c : comps) total += c.mass;
  if (!(total > 0.0)) {
    throw ImpossibleEvidence("observation has zero likelihood under every secret");
  }
  std::vector<BeliefComponent> kept;
  kept.reserve(comps.size());
  for (auto& c : comps) {
    if (c.mass <= 0.0) continue;
    c.mass /= total;
    kept.push_back(std::move(c));
  }
  return BeliefState(like.space_id(), {like.radices().begin(), like.radices().end()},
                     std::move(kept));
}

}  // namespace detail

// Distribution of a predicate's answer under the belief (length = arity).
inline std::vector<double> answer_distribution(const BeliefState& belief, const Predicate& p) {
  validate_predicate(p, belief.radices());
  const auto k = arity(p, belief.radices());
  if (p.family == PredicateFamily::reveal_all) return belief.probabilities();
  std::vector<double> dist(k, 0.0);
  if (p.family == PredicateFamily::constant) {
    dist[0] = 1.0;
    return dist;
  }
  if (p.per_position()) {
    for (const auto& c : belief.components()) {
      const auto& m = c.marginals[p.position];
      for (std::size_t x = 0; x < m.size(); ++x) {
        dist[position_answer(p, static_cast<std::uint32_t>(x))] += c.mass * m[x];
      }
    }
    return dist;
  }
  const auto target = digits_of(belief.radices(), p.param);
  for (const auto& c : belief.components()) {
    const auto lm = detail::lex_masses(c, target);
    dist[lex_answer(p, -1)] += c.mass * lm.less;
    dist[lex_answer(p, 0)] += c.mass * lm.equal;
    dist[lex_answer(p, 1)] += c.mass * lm.greater;
  }
  return dist;
}

// Multiplies the belief by a likelihood that depends on the secret only
// through the predicate's answer, then renormalizes.
inline BeliefState reweight(const BeliefState& belief, const Predicate& p,
                            std::span<const double> answer_likelihood) {
  validate_predicate(p, belief.radices());
  if (p.family == PredicateFamily::reveal_all) {
    throw ValidationError("use reweight_positions for reveal-all predicates");
  }
  if (answer_likelihood.size() != arity(p, belief.radices())) {
    throw ValidationError("likelihood length does not match predicate arity");
  }
  std::vector<BeliefComponent> out;
  if (p.family == PredicateFamily::constant) {
    out = belief.components();
    for (auto& c : out) c.mass *= answer_likelihood[0];
    return detail::normalized(belief, std::move(out));
  }
  if (p.per_position()) {
    for (const auto& c : belief.components()) {
      BeliefComponent n = c;
      auto& m = n.marginals[p.position];
      double factor = 0.0;
      for (std::size_t x = 0; x < m.size(); ++x) {
        m[x] *= answer_likelihood[position_answer(p, static_cast<std::uint32_t>(x))];
        factor += m[x];
      }
      if (factor <= 0.0) continue;
      for (double& x : m) x /= factor;
      n.mass *= factor;
      out.push_back(std::move(n));
    }
    return detail::normalized(belief, std::move(out));
  }
  const auto target = digits_of(belief.radices(), p.param);
  for (const auto& c : belief.components()) {
    const auto lm = detail::lex_masses(c, target);
    const double parts[3] = {lm.less, lm.equal, lm.greater};
    int nonzero = 0, only = 0;
    for (int i = 0; i < 3; ++i) {
      if (parts[i] > 0.0) {
        ++nonzero;
        only = i - 1;
      }
    }
    if (nonzero <= 1) {
      BeliefComponent n = c;
      n.mass *= answer_likelihood[lex_answer(p, only)];
      out.push_back(std::move(n));
      continue;
    }
    for (auto& [piece, cmp] : detail::lex_split(c, target)) {
      piece.mass *= answer_likelihood[lex_answer(p, cmp)];
      out.push_back(std::move(piece));
    }
  }
  return detail::normalized(belief, std::move(out));
}

// Multiplies by a product likelihood, one vector per position.
inline BeliefState reweight_positions(const BeliefState& belief,
                                      const std::vector<std::vector<double>>& likelihood) {
  if (likelihood.size() != belief.radices().size()) {
    throw ValidationError("per-position likelihood width mismatch");
  }
  std::vector<BeliefComponent> out;
  for (const auto& c : belief.components()) {
    BeliefComponent n = c;
    bool dead = false;
    for (std::size_t i = 0; i < likelihood.size() && !dead; ++i) {
      auto& m = n.marginals[i];
      double factor = 0.0;
      for (std::size_t x = 0; x < m.size(); ++x) {
        m[x] *= likelihood[i].at(x);
        factor += m[x];
      }
      if (factor <= 0.0) {
        dead = true;
        break;
      }
      for (double& x : m) x /= factor;
      n.mass *= factor;
    }
    if (!dead) out.push_back(std::move(n));
  }
  return detail::normalized(belief, std::move(out));
}

// ---------------------------------------------------------------------------
// Observation kernels.
//
// A kernel is a mixture of branches whose selection probability does not
// depend on the secret, and whose identity is visible in the observation
// (refusal vs. answer vs. exfiltration). Within an informative branch the
// secret is reduced to a predicate answer and optionally passed through
// k-ary randomized response with parameter epsilon (per position for
// reveal-all).

struct KernelBranch {
  double weight = 1.0;
  bool informative = false;
  Predicate predicate;
  double epsilon = kNoNoise;
  // Opaque to this module; the oracle uses it to pick a rendering.
  std::uint8_t tag = 0;
};

struct ObservationKernel {
  std::vector<KernelBranch> branches;

  void validate() const {
    double total = 0.0;
    for (const auto& b : branches) {
      if (!(b.weight >= 0.0) || b.weight > 1.0 + kProbTolerance) {
        throw ValidationError("kernel branch weight outside [0,1]");
      }
      if (!(b.epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
      total += b.weight;
    }
    if (std::abs(total - 1.0) > kProbTolerance) {
      throw ValidationError("kernel branch weights do not sum to 1");
    }
  }
};

struct Outcome {
  std::size_t branch = 0;
  std::uint64_t symbol = 0;             // scalar predicates
  std::vector<std::uint32_t> symbols;   // reveal-all, one per position

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// Probability that k-ary randomized response reports the true symbol.
inline double rr_keep(double epsilon, std::uint64_t k) {
  if (k <= 1 || std::isinf(epsilon)) return 1.0;
  return 1.0 / (1.0 + static_cast<double>(k - 1) * std::exp(-epsilon));
}

inline double rr_prob(double epsilon, std::uint64_t k, std::uint64_t reported,
                      std::uint64_t truth) {
  const double keep = rr_keep(epsilon, k);
  if (reported == truth) return keep;
  return k <= 1 ? 0.0 : (1.0 - keep) / static_cast<double>(k - 1);
}

// Mutual information between a k-ary input with distribution p and its
// randomized-response report.
inline double rr_information(std::span<const double> p, double epsilon) {
  const auto k = p.size();
  if (k <= 1) return 0.0;
  const double keep = rr_keep(epsilon, k);
  const double cross = (1.0 - keep) / static_cast<double>(k - 1);
  std::vector<double> q(k);
  for (std::size_t b = 0; b < k; ++b) q[b] = keep * p[b] + cross * (1.0 - p[b]);
  double row = -(keep > 0.0 ? keep * std::log2(keep) : 0.0);
  if (cross > 0.0) row -= static_cast<double>(k - 1) * cross * std::log2(cross);
  // Symbols with zero answer mass still receive cross mass; H(q) handles it.
  return std::max(0.0, entropy_bits(q) - row);
}

inline double likelihood(std::span<const std::uint32_t> radices, const ObservationKernel& kernel,
                         const Outcome& o, std::span<const std::uint32_t> secret_digits) {
  const auto& b = kernel.branches.at(o.branch);
  if (!b.informative) return b.weight;
  if (b.predicate.family == PredicateFamily::reveal_all) {
    double l = b.weight;
    for (std::size_t i = 0; i < radices.size(); ++i) {
      l *= rr_prob(b.epsilon, radices[i], o.symbols.at(i), secret_digits[i]);
    }
    return l;
  }
  const auto k = arity(b.predicate, radices);
  return b.weight * rr_prob(b.epsilon, k, o.symbol, evaluate(b.predicate, radices, secret_digits));
}

inline double branch_information(const BeliefState& belief, const KernelBranch& b) {
  if (!b.informative) return 0.0;
  const auto radices = belief.radices();
  if (b.predicate.family != PredicateFamily::reveal_all) {
    const auto dist = answer_distribution(belief, b.predicate);
    return rr_information(dist, b.epsilon);
  }
  if (std::isinf(b.epsilon)) return entropy(belief);
  if (belief.components().size() == 1) {
    double total = 0.0;
    for (const auto& m : belief.components()[0].marginals) total += rr_information(m, b.epsilon);
    return total;
  }
  // Mixture of products: H(Y) by enumeration over reports, H(Y|S) is constant.
  const auto n = belief.size();
  if (n > kDenseLimit) {
    throw ValidationError("noisy reveal-all over a multi-component belief needs a dense space");
  }
  double h_cond = 0.0;
  for (auto r : radices) {
    const double keep = rr_keep(b.epsilon, r);
    const double cross = r > 1 ? (1.0 - keep) / (r - 1) : 0.0;
    if (keep > 0.0) h_cond -= keep * std::log2(keep);
    if (cross > 0.0) h_cond -= (r - 1) * cross * std::log2(cross);
  }
  // Per component, per position report distribution.
  std::vector<std::vector<std::vector<double>>> pushed;
  for (const auto& c : belief.components()) {
    std::vector<std::vector<double>> per;
    for (std::size_t i = 0; i < radices.size(); ++i) {
      const auto r = radices[i];
      const double keep = rr_keep(b.epsilon, r);
      const double cross = r > 1 ? (1.0 - keep) / (r - 1) : 0.0;
      std::vector<double> q(r);
      for (std::size_t y = 0; y < r; ++y) {
        q[y] = keep * c.marginals[i][y] + cross * (1.0 - c.marginals[i][y]);
      }
      per.push_back(std::move(q));
    }
    pushed.push_back(std::move(per));
  }
  double h_y = 0.0;
  std::vector<std::uint32_t> y(radices.size(), 0);
  for (std::uint64_t idx = 0; idx < n; ++idx) {
    double q = 0.0;
    for (std::size_t ci = 0; ci < pushed.size(); ++ci) {
      double part = belief.components()[ci].mass;
      for (std::size_t i = 0; i < y.size(); ++i) part *= pushed[ci][i][y[i]];
      q += part;
    }
    if (q > 0.0) h_y -= q * std::log2(q);
    for (std::size_t i = y.size(); i-- > 0;) {
      if (++y[i] < radices[i]) break;
      y[i] = 0;
    }
  }
  return std::max(0.0, h_y - h_cond);
}

// I(S; O | belief) for one query, exact.
inline double expected_info_gain(const BeliefState& belief, const ObservationKernel& kernel) {
  belief.validate();
  kernel.validate();
  double total = 0.0;
  for (const auto& b : kernel.branches) {
    if (b.weight > 0.0) total += b.weight * branch_information(belief, b);
  }
  return total;
}

inline BeliefState posterior_update(const BeliefState& belief, const ObservationKernel& kernel,
                                    const Outcome& o) {
  kernel.validate();
  if (o.branch >= kernel.branches.size()) throw ValidationError("outcome branch out of range");
  const auto& b = kernel.branches[o.branch];
  if (b.weight <= 0.0) throw ImpossibleEvidence("observation from a zero-probability branch");
  if (!b.informative) return belief;
  const auto radices = belief.radices();
  if (b.predicate.family == PredicateFamily::reveal_all) {
    if (o.symbols.size() != radices.size()) throw ValidationError("reveal-all symbol width");
    std::vector<std::vector<double>> lik;
    for (std::size_t i = 0; i < radices.size(); ++i) {
      if (o.symbols[i] >= radices[i]) throw ValidationError("reported digit out of range");
      std::vector<double> l(radices[i]);
      for (std::uint32_t x = 0; x < radices[i]; ++x) {
        l[x] = rr_prob(b.epsilon, radices[i], o.symbols[i], x);
      }
      lik.push_back(std::move(l));
    }
    return reweight_positions(belief, lik);
  }
  const auto k = arity(b.predicate, radices);
  if (o.symbol >= k) throw ValidationError("observed symbol outside the answer alphabet");
  std::vector<double> lik(k);
  for (std::uint64_t a = 0; a < k; ++a) lik[a] = rr_prob(b.epsilon, k, o.symbol, a);
  return reweight(belief, b.predicate, lik);
}

// Every outcome with positive predictive probability under the belief.
inline std::vector<std::pair<Outcome, double>> predictive_outcomes(
    const BeliefState& belief, const ObservationKernel& kernel) {
  std::vector<std::pair<Outcome, double>> out;
  const auto radices = belief.radices();
  for (std::size_t bi = 0; bi < kernel.branches.size(); ++bi) {
    const auto& b = kernel.branches[bi];
    if (b.weight <= 0.0) continue;
    if (!b.informative) {
      out.push_back({Outcome{bi, 0, {}}, b.weight});
      continue;
    }
    if (b.predicate.family == PredicateFamily::reveal_all) {
      const auto probs = belief.probabilities();
      std::vector<std::uint32_t> y(radices.size(), 0);
      for (std::uint64_t idx = 0; idx < probs.size(); ++idx) {
        double q = 0.0;
        if (std::isinf(b.epsilon)) {
          q = probs[idx];
        } else {
          std::vector<std::uint32_t> s(radices.size(), 0);
          for (std::uint64_t sidx = 0; sidx < probs.size(); ++sidx) {
            if (probs[sidx] > 0.0) {
              double l = probs[sidx];
              for (std::size_t i = 0; i < s.size(); ++i) l *= rr_prob(b.epsilon, radices[i], y[i], s[i]);
              q += l;
            }
            for (std::size_t i = s.size(); i-- > 0;) {
              if (++s[i] < radices[i]) break;
              s[i] = 0;
            }
          }
        }
        if (q > 0.0) out.push_back({Outcome{bi, 0, y}, b.weight * q});
        for (std::size_t i = y.size(); i-- > 0;) {
          if (++y[i] < radices[i]) break;
          y[i] = 0;
        }
      }
      continue;
    }
    const auto dist = answer_distribution(belief, b.predicate);
    const auto k = dist.size();
    for (std::uint64_t y = 0; y < k; ++y) {
      double q = 0.0;
      for (std::uint64_t a = 0; a < k; ++a) q += dist[a] * rr_prob(b.epsilon, k, y, a);
      if (q > 0.0) out.push_back({Outcome{bi, y, {}}, b.weight * q});
    }
  }
  return out;
}

}  // namespace leakbench
