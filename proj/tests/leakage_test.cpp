#include "leakbench/leakage.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace leakbench {
namespace {

std::vector<std::vector<double>> bsc(double p) { return {{1 - p, p}, {p, 1 - p}}; }

TEST(Capacity, BinarySymmetricClosedForm) {
  for (double p : {0.0, 0.1, 0.25, 0.5}) {
    EXPECT_NEAR(capacity_from_matrix(bsc(p)), 1.0 - binary_entropy(p), 1e-6) << p;
  }
  EXPECT_NEAR(capacity_from_matrix(bsc(0.1)), 0.5310, 1e-4);
}

TEST(Capacity, AsymmetricZChannel) {
  // Z channel with crossover 1/2: log2(5/4).
  EXPECT_NEAR(capacity_from_matrix({{1.0, 0.0}, {0.5, 0.5}}), std::log2(1.25), 1e-6);
}

TEST(Capacity, RejectsBadMatrix) {
  EXPECT_THROW(capacity_from_matrix({{0.5, 0.4}, {0.5, 0.5}}), ValidationError);
}

TEST(Capacity, KernelChannels) {
  const auto space = SecretSpace::digit_code("code", 2);
  ObservationKernel yes_no;
  yes_no.branches.push_back({1.0, true, Predicate::digit_threshold(0, 5), kNoNoise, 1});
  EXPECT_NEAR(channel_capacity(space, yes_no), 1.0, 1e-9);

  ObservationKernel refuse;
  refuse.branches.push_back({1.0, false, Predicate::constant(), kNoNoise, 0});
  EXPECT_EQ(channel_capacity(space, refuse), 0.0);

  ObservationKernel reveal;
  reveal.branches.push_back({1.0, true, Predicate::reveal_all(), kNoNoise, 1});
  EXPECT_NEAR(channel_capacity(space, reveal), std::log2(100.0), 1e-9);
}

TEST(Capacity, DpChannelsBelowEpsilonBits) {
  const auto space = SecretSpace::mixed_radix("m", {3, 4});
  for (double eps : {0.0, 0.5, 1.0, std::log(9.0)}) {
    for (auto p : {Predicate::digit_threshold(0, 1), Predicate::digit_value(1),
                   Predicate::value_equals(5)}) {
      ObservationKernel k;
      k.branches.push_back({1.0, true, p, eps, 1});
      EXPECT_LE(channel_capacity(space, k), eps * std::log2(std::exp(1.0)) + 1e-9);
    }
  }
}

TEST(Capacity, BoundsExpectedGain) {
  const auto space = SecretSpace::mixed_radix("m", {4, 4});
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(space.size());
    for (auto& x : w) x = uniform01(rng) + 0.01;
    const auto belief = BeliefState::from_weights(space, w);
    for (auto p : {Predicate::digit_value(0), Predicate::value_threshold(7)}) {
      ObservationKernel k;
      k.branches.push_back({0.8, true, p, 1.0, 1});
      k.branches.push_back({0.2, false, Predicate::constant(), kNoNoise, 0});
      EXPECT_LE(expected_info_gain(belief, k), channel_capacity(space, k) + 1e-9);
    }
  }
}

Transcript noisy_transcript(const SecretSpace& space, std::uint64_t secret, int turns,
                            std::uint64_t seed, const ObservationKernel& k) {
  Rng rng(seed);
  Transcript tr;
  auto b = BeliefState::uniform(space);
  tr.prior_entropy_bits = entropy(b);
  double h = tr.prior_entropy_bits;
  const auto digits = space.digits_of(secret);
  for (int t = 0; t < turns; ++t) {
    const auto& br = k.branches[0];
    Outcome o{0, evaluate(br.predicate, space.radices(), digits), {}};
    if (uniform01(rng) > rr_keep(br.epsilon, 2)) o.symbol ^= 1;
    b = posterior_update(b, k, o);
    TurnRecord r;
    r.t = t + 1;
    const double nh = entropy(b);
    r.info_gain_bits = h - nh;
    r.expected_gain_bits = 0.0;
    r.posterior_entropy_bits = nh;
    h = nh;
    tr.turns.push_back(r);
  }
  return tr;
}

TEST(ChainRule, EmptyAndNoisy) {
  Transcript empty;
  EXPECT_EQ(chain_rule_check(empty), 0.0);
  EXPECT_EQ(cumulative_mi(empty), 0.0);

  const auto space = SecretSpace::mixed_radix("m", {2, 2, 2});
  ObservationKernel k;
  k.branches.push_back({1.0, true, Predicate::value_threshold(4), 1.0, 1});
  const auto tr = noisy_transcript(space, 5, 3, 7, k);
  EXPECT_LT(chain_rule_check(tr), 1e-9);

  auto broken = tr;
  broken.turns[1].posterior_entropy_bits.reset();
  EXPECT_THROW(chain_rule_check(broken), ValidationError);
}

// I(S; O_1..O_3) by brute force over the joint distribution equals the
// expected sum of per-turn conditional gains.
TEST(ChainRule, HoldsInExpectationByEnumeration) {
  const auto space = SecretSpace::mixed_radix("m", {2, 2, 2});
  const std::vector<Predicate> plan{Predicate::value_threshold(4), Predicate::digit_value(1),
                                    Predicate::value_equals(3)};
  const double eps = 0.7;
  const auto prior = BeliefState::uniform(space);

  // Expected sum of conditional MI along the (non-adaptive) plan.
  std::function<double(const BeliefState&, std::size_t)> walk = [&](const BeliefState& b,
                                                                     std::size_t t) -> double {
    if (t == plan.size()) return 0.0;
    ObservationKernel k;
    k.branches.push_back({1.0, true, plan[t], eps, 1});
    double total = expected_info_gain(b, k);
    for (const auto& [o, p] : predictive_outcomes(b, k)) {
      if (p > 0.0) total += p * walk(posterior_update(b, k, o), t + 1);
    }
    return total;
  };
  const double chain = walk(prior, 0);

  // Joint enumeration: I = H(O) - H(O|S).
  std::map<std::uint64_t, double> p_o;
  double h_o_given_s = 0.0;
  for (std::uint64_t s = 0; s < space.size(); ++s) {
    const auto d = space.digits_of(s);
    for (std::uint64_t ys = 0; ys < 8; ++ys) {
      double p = 1.0;
      for (std::size_t t = 0; t < plan.size(); ++t) {
        const auto y = (ys >> t) & 1u;
        p *= rr_prob(eps, 2, y, evaluate(plan[t], space.radices(), d));
      }
      p_o[ys] += p / 8.0;
      h_o_given_s -= p > 0.0 ? p / 8.0 * std::log2(p) : 0.0;
    }
  }
  double h_o = 0.0;
  for (const auto& [y, p] : p_o) h_o -= p > 0.0 ? p * std::log2(p) : 0.0;
  EXPECT_NEAR(chain, h_o - h_o_given_s, 1e-12);
}

TEST(Bound, RefusalOnlyTranscript) {
  Transcript tr;
  tr.prior_entropy_bits = 9.0;
  for (int t = 1; t <= 4; ++t) {
    TurnRecord r;
    r.t = t;
    r.posterior_entropy_bits = 9.0;
    tr.turns.push_back(r);
  }
  EXPECT_EQ(cumulative_mi(tr), 0.0);
  const auto v = bound_check(tr, 1.0, false);
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.min_turns_required, 9u);
}

TEST(Bound, NineDigitNeedsThirtyTurns) {
  Transcript tr;
  tr.prior_entropy_bits = 9 * std::log2(10.0);
  EXPECT_EQ(bound_check(tr, 1.0, false).min_turns_required, 30u);
  // A successful 20-turn transcript would contradict the bound.
  for (int t = 1; t <= 20; ++t) {
    TurnRecord r;
    r.t = t;
    r.expected_gain_bits = 1.0;
    tr.turns.push_back(r);
  }
  EXPECT_FALSE(bound_check(tr, 1.0, true).success_turns_ok);
  EXPECT_THROW(bound_check(tr, 0.0, true), ValidationError);
}

TEST(Fraction, ClampedToUnitInterval) {
  EXPECT_EQ(fraction_revealed(10.0, 0.0), 1.0);
  EXPECT_EQ(fraction_revealed(10.0, 12.0), 0.0);
  EXPECT_DOUBLE_EQ(fraction_revealed(10.0, 2.5), 0.75);
  EXPECT_EQ(fraction_revealed(0.0, 0.0), 1.0);
}

}  // namespace
}  // namespace leakbench
