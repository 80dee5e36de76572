#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "leakbench/defense/detector.hpp"
#include "leakbench/errors.hpp"
#include "leakbench/oracle.hpp"
#include "leakbench/query.hpp"
#include "leakbench/secretmodel.hpp"

namespace leakbench {

inline constexpr double kLeakTolerance = 1e-9;

struct TurnRecord {
  std::size_t t = 0;  // 1-based
  Query query;
  Observation observation;
  double detect_score = 0.0;
  bool detect_flag = false;
  defense::Action action = defense::Action::allow;
  // Realized entropy drop H(S|o_<t) - H(S|o_<=t); negative after an unlucky
  // noisy answer.
  double info_gain_bits = 0.0;
  // I(S; O_t | o_<t, q_t) under the recipient's channel model; never negative.
  double expected_gain_bits = 0.0;
  std::optional<double> posterior_entropy_bits;
  std::string prompt;
  std::vector<std::string> sanitizer_flags;
};

struct Verification {
  Query query;
  Observation observation;
  bool confirmed = false;
};

struct Transcript {
  std::string scenario_id;
  std::uint64_t seed = 0;
  double prior_entropy_bits = 0.0;
  std::vector<TurnRecord> turns;
  std::optional<Verification> verification;
};

struct LeakageReport {
  double cumulative_mi_bits = 0.0;
  std::vector<double> fraction_revealed;  // per turn
  bool success = false;
  bool exfil_success = false;
  std::size_t turns_used = 0;
  std::size_t detection_events = 0;
  std::optional<double> bound_ell;
  double final_entropy_bits = 0.0;
  std::string stop_reason;
  std::string guess;
};

inline double fraction_revealed(double prior_bits, double posterior_bits) {
  if (prior_bits <= 0.0) return 1.0;
  return std::clamp(1.0 - posterior_bits / prior_bits, 0.0, 1.0);
}

inline double cumulative_mi(const Transcript& tr) {
  double s = 0.0;
  for (const auto& t : tr.turns) s += t.info_gain_bits;
  return s;
}

// |sum_t I_t - (H_prior - H_final)|.
inline double chain_rule_check(const Transcript& tr) {
  if (tr.turns.empty()) return 0.0;
  for (const auto& t : tr.turns) {
    if (!t.posterior_entropy_bits) {
      throw ValidationError("transcript turn " + std::to_string(t.t) + " has no belief trace");
    }
  }
  const double final_h = *tr.turns.back().posterior_entropy_bits;
  return std::abs(cumulative_mi(tr) - (tr.prior_entropy_bits - final_h));
}

struct BoundVerdict {
  double ell = 0.0;
  double max_turn_gain_bits = 0.0;
  bool per_turn_ok = true;
  std::size_t min_turns_required = 0;  // ceil(H_prior / ell)
  bool success_turns_ok = true;        // success implies turns >= H/ell - 1
  bool cumulative_ok = true;           // expected leakage <= T * ell
  bool ok() const { return per_turn_ok && success_turns_ok && cumulative_ok; }
};

// Uses the per-turn conditional mutual information, which is what an
// ell-capped channel bounds. Realized entropy drops may exceed ell.
inline BoundVerdict bound_check(const Transcript& tr, double ell, bool success) {
  if (!(ell > 0.0)) throw ValidationError("ell must be positive");
  BoundVerdict v;
  v.ell = ell;
  double sum = 0.0;
  for (const auto& t : tr.turns) {
    v.max_turn_gain_bits = std::max(v.max_turn_gain_bits, t.expected_gain_bits);
    if (t.expected_gain_bits > ell + kLeakTolerance) v.per_turn_ok = false;
    sum += t.expected_gain_bits;
  }
  v.min_turns_required = static_cast<std::size_t>(std::ceil(tr.prior_entropy_bits / ell - 1e-12));
  if (success) {
    v.success_turns_ok =
        static_cast<double>(tr.turns.size()) >= tr.prior_entropy_bits / ell - 1.0 - kLeakTolerance;
  }
  v.cumulative_ok = sum <= static_cast<double>(tr.turns.size()) * ell + kLeakTolerance;
  return v;
}

// ---------------------------------------------------------------------------
// Channel capacity

inline constexpr int kCapacityMaxIter = 10000;
inline constexpr double kCapacityTol = 1e-9;

// Blahut-Arimoto on a row-stochastic matrix W[x][y]. Returns bits.
inline double capacity_from_matrix(const std::vector<std::vector<double>>& w) {
  if (w.empty()) return 0.0;
  const std::size_t nx = w.size(), ny = w[0].size();
  for (const auto& row : w) {
    if (row.size() != ny) throw ValidationError("channel matrix rows differ in length");
    double s = 0.0;
    for (double x : row) {
      if (!(x >= 0.0)) throw ValidationError("channel matrix has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("channel matrix row does not sum to 1");
  }
  if (nx == 1) return 0.0;
  std::vector<double> p(nx, 1.0 / static_cast<double>(nx)), q(ny), c(nx);
  double prev = -1.0;
  for (int iter = 0; iter < kCapacityMaxIter; ++iter) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t y = 0; y < ny; ++y) q[y] += p[x] * w[x][y];
    }
    double total = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      double d = 0.0;  // KL(W(.|x) || q) in nats
      for (std::size_t y = 0; y < ny; ++y) {
        if (w[x][y] > 0.0) d += w[x][y] * std::log(w[x][y] / q[y]);
      }
      c[x] = std::exp(d);
      total += p[x] * c[x];
    }
    const double estimate = std::max(0.0, std::log(total) / std::log(2.0));
    if (prev >= 0.0 && std::abs(estimate - prev) < kCapacityTol) return estimate;
    prev = estimate;
    for (std::size_t x = 0; x < nx; ++x) p[x] = p[x] * c[x] / total;
  }
  throw NumericError("capacity iteration did not converge", prev);
}

inline double rr_capacity(std::uint64_t k, double epsilon) {
  if (k <= 1) return 0.0;
  const double keep = rr_keep(epsilon, k);
  const double cross = (1.0 - keep) / static_cast<double>(k - 1);
  double row = keep > 0.0 ? -keep * std::log2(keep) : 0.0;
  if (cross > 0.0) row -= static_cast<double>(k - 1) * cross * std::log2(cross);
  return std::max(0.0, std::log2(static_cast<double>(k)) - row);
}

// Maximum over secret distributions of I(S; O) for one query's kernel.
//
// Inputs are the predicate answers reachable in the space (plus one output
// column per non-informative branch). A reveal-all kernel is symmetric per
// position, so the uniform input is optimal and the closed form is used.
inline double channel_capacity(const SecretSpace& space, const ObservationKernel& kernel) {
  kernel.validate();
  std::optional<Predicate> pred;
  for (const auto& b : kernel.branches) {
    if (!b.informative || b.weight <= 0.0) continue;
    if (pred && !(*pred == b.predicate)) {
      throw ValidationError("capacity needs all informative branches to share a predicate");
    }
    pred = b.predicate;
  }
  if (!pred) return 0.0;
  if (pred->family == PredicateFamily::reveal_all) {
    double c = 0.0;
    for (const auto& b : kernel.branches) {
      if (!b.informative || b.weight <= 0.0) continue;
      double per = 0.0;
      for (auto r : space.radices()) per += rr_capacity(r, b.epsilon);
      c += b.weight * per;
    }
    return c;
  }
  const auto radices = space.radices();
  const auto k = arity(*pred, radices);
  const auto dist = answer_distribution(BeliefState::uniform(space), *pred);
  std::vector<std::uint64_t> reachable;
  for (std::uint64_t a = 0; a < k; ++a) {
    if (dist[a] > 0.0) reachable.push_back(a);
  }
  std::vector<std::vector<double>> w;
  for (auto a : reachable) {
    std::vector<double> row;
    for (const auto& b : kernel.branches) {
      if (b.weight <= 0.0) continue;
      if (!b.informative) {
        row.push_back(b.weight);
        continue;
      }
      for (std::uint64_t y = 0; y < k; ++y) row.push_back(b.weight * rr_prob(b.epsilon, k, y, a));
    }
    w.push_back(std::move(row));
  }
  return capacity_from_matrix(w);
}

}  // namespace leakbench
