#include "leakbench/secretmodel.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace leakbench {
namespace {

ObservationKernel noiseless(const Predicate& p) {
  return {{KernelBranch{1.0, true, p, kNoNoise, 0}}};
}

TEST(SecretSpaceTest, DigitCodeIndexing) {
  auto s = SecretSpace::digit_code("code", 9);
  EXPECT_EQ(s.size(), 1000000000ull);
  EXPECT_EQ(s.label(492867135), "492867135");
  EXPECT_EQ(s.find("000000042"), 42u);
  EXPECT_FALSE(s.find("12345678").has_value());
  EXPECT_FALSE(s.find("12345678x").has_value());
}

TEST(SecretSpaceTest, ListRejectsDuplicatesAndEmpty) {
  EXPECT_THROW(SecretSpace::from_list("x", {}), ValidationError);
  EXPECT_THROW(SecretSpace::from_list("x", {"a", "b", "a"}), ValidationError);
  auto s = SecretSpace::from_list("x", {"falcon", "osprey"});
  EXPECT_EQ(s.label(1), "osprey");
  EXPECT_EQ(s.find("falcon"), 0u);
}

TEST(SecretSpaceTest, WideRadixLabelsUseDots) {
  auto s = SecretSpace::mixed_radix("m", {16, 3});
  EXPECT_EQ(s.label(17), "5.2");
  EXPECT_EQ(s.find("15.2"), 47u);
}

TEST(EntropyTest, Examples) {
  EXPECT_NEAR(entropy(BeliefState::uniform(SecretSpace::digit_code("c", 9))),
              9 * std::log2(10.0), 1e-12);
  EXPECT_NEAR(entropy(BeliefState::uniform(SecretSpace::digit_code("c", 9))), 29.897, 5e-4);
  auto s512 = SecretSpace::mixed_radix("b", std::vector<std::uint32_t>(9, 2));
  EXPECT_NEAR(entropy(BeliefState::uniform(s512)), 9.0, 1e-12);
  EXPECT_EQ(entropy(BeliefState::point_mass(s512, 77)), 0.0);
}

TEST(EntropyTest, MalformedBeliefThrows) {
  BeliefComponent c{0.5, {{0.5, 0.5}}};
  EXPECT_THROW(BeliefState("x", {2}, {c}), ValidationError);
}

TEST(PosteriorTest, ThresholdPartition) {
  auto s = SecretSpace::digit_code("d", 1);
  auto post = posterior_update(BeliefState::uniform(s), noiseless(Predicate::digit_threshold(0, 5)),
                               Outcome{0, 1, {}});
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(post.probability(i), i >= 5 ? 0.2 : 0.0, 1e-15);
}

TEST(PosteriorTest, UninformativeIsIdentity) {
  auto s = SecretSpace::digit_code("d", 2);
  std::vector<double> w(100);
  for (int i = 0; i < 100; ++i) w[i] = 1.0 + i % 7;
  auto prior = BeliefState::from_weights(s, w);
  ObservationKernel refuse{{KernelBranch{1.0, false, Predicate::constant(), kNoNoise, 0}}};
  auto post = posterior_update(prior, refuse, Outcome{0, 0, {}});
  EXPECT_EQ(post.probabilities(), prior.probabilities());
}

TEST(PosteriorTest, NoisyBinaryBayes) {
  auto s = SecretSpace::from_list("b", {"false", "true"});
  // epsilon = ln 9 gives flip probability 0.1 on a binary alphabet.
  ObservationKernel k{{KernelBranch{1.0, true, Predicate::value_equals(1), std::log(9.0), 0}}};
  auto post = posterior_update(BeliefState::uniform(s), k, Outcome{0, 1, {}});
  EXPECT_NEAR(post.probability(1), 0.9, 1e-12);
}

TEST(PosteriorTest, ImpossibleEvidence) {
  auto s = SecretSpace::digit_code("d", 1);
  auto b = posterior_update(BeliefState::uniform(s), noiseless(Predicate::digit_threshold(0, 5)),
                            Outcome{0, 1, {}});
  EXPECT_THROW(posterior_update(b, noiseless(Predicate::digit_threshold(0, 5)), Outcome{0, 0, {}}),
               ImpossibleEvidence);
}

TEST(InfoGainTest, Examples) {
  auto s = SecretSpace::digit_code("d", 1);
  auto u = BeliefState::uniform(s);
  EXPECT_NEAR(expected_info_gain(u, noiseless(Predicate::digit_threshold(0, 5))), 1.0, 1e-12);
  EXPECT_NEAR(expected_info_gain(u, noiseless(Predicate::digit_equals(0, 3))), 0.4689955935892812,
              1e-12);
  ObservationKernel refuse{{KernelBranch{1.0, false, Predicate::constant(), kNoNoise, 0}}};
  EXPECT_EQ(expected_info_gain(u, refuse), 0.0);
}

// Dense brute-force reference for the mixture representation.
double brute_gain(const SecretSpace& s, const BeliefState& b, const ObservationKernel& k) {
  const auto probs = b.probabilities();
  double h_o_given_s = 0.0;
  auto outcomes = predictive_outcomes(b, k);
  double h_o = 0.0;
  for (auto& [o, p] : outcomes) h_o -= p * std::log2(p);
  for (std::uint64_t i = 0; i < s.size(); ++i) {
    if (probs[i] == 0.0) continue;
    const auto d = s.digits_of(i);
    for (auto& [o, p] : outcomes) {
      double l = likelihood(s.radices(), k, o, d);
      if (l > 0.0) h_o_given_s -= probs[i] * l * std::log2(l);
    }
  }
  return h_o - h_o_given_s;
}

TEST(InfoGainTest, MixtureMatchesDenseEnumeration) {
  auto s = SecretSpace::mixed_radix("m", {3, 4, 2});
  auto b = BeliefState::from_position_weights(s, {{1, 2, 3}, {1, 1, 1, 5}, {2, 1}});
  // Split into a mixture via two lexicographic observations.
  b = posterior_update(b, noiseless(Predicate::value_threshold(7)), Outcome{0, 1, {}});
  ObservationKernel noisy{{KernelBranch{0.7, true, Predicate::value_threshold(15), 1.0, 0},
                           KernelBranch{0.3, false, Predicate::constant(), kNoNoise, 1}}};
  b = posterior_update(b, noisy, Outcome{0, 0, {}});
  ASSERT_GT(b.components().size(), 1u);

  std::vector<ObservationKernel> ks = {
      noiseless(Predicate::digit_value(1)),
      noiseless(Predicate::value_equals(10)),
      {{KernelBranch{1.0, true, Predicate::reveal_all(), 0.8, 0}}},
      {{KernelBranch{0.5, true, Predicate::digit_in_set(1, {true, false, true, false}), 2.0, 0},
        KernelBranch{0.5, true, Predicate::reveal_all(), kNoNoise, 1}}},
  };
  for (const auto& k : ks) {
    EXPECT_NEAR(expected_info_gain(b, k), brute_gain(s, b, k), 1e-12);
  }
}

TEST(InfoGainTest, ExpectedPosteriorEntropyIdentity) {
  auto s = SecretSpace::mixed_radix("m", {4, 5});
  auto b = BeliefState::from_position_weights(s, {{1, 3, 0, 2}, {5, 4, 3, 2, 1}});
  std::vector<ObservationKernel> ks = {
      {{KernelBranch{1.0, true, Predicate::value_threshold(9), 0.4, 0}}},
      {{KernelBranch{1.0, true, Predicate::reveal_all(), 1.5, 0}}},
      {{KernelBranch{0.6, true, Predicate::digit_value(1), 0.3, 0},
        KernelBranch{0.4, false, Predicate::constant(), kNoNoise, 1}}},
  };
  for (const auto& k : ks) {
    double expected_h = 0.0;
    for (auto& [o, p] : predictive_outcomes(b, k)) expected_h += p * entropy(posterior_update(b, k, o));
    EXPECT_NEAR(expected_h, entropy(b) - expected_info_gain(b, k), 1e-9);
    const auto n_symbols = predictive_outcomes(b, k).size();
    EXPECT_LE(expected_info_gain(b, k), std::log2(static_cast<double>(n_symbols)) + 1e-12);
  }
}

TEST(BeliefTest, LexSplitKeepsMassAndMap) {
  auto s = SecretSpace::digit_code("c", 9);
  auto b = BeliefState::uniform(s);
  b = posterior_update(b, noiseless(Predicate::value_threshold(492867135)), Outcome{0, 1, {}});
  EXPECT_NEAR(entropy(b), std::log2(1e9 - 492867135), 1e-9);
  b = posterior_update(b, noiseless(Predicate::value_threshold(492867136)), Outcome{0, 0, {}});
  EXPECT_NEAR(entropy(b), 0.0, 1e-12);
  EXPECT_EQ(b.map_index(), 492867135u);
}

TEST(BeliefTest, MapTiesGoToLowestIndex) {
  auto s = SecretSpace::digit_code("c", 2);
  EXPECT_EQ(BeliefState::uniform(s).map_index(), 0u);
}

TEST(RandomizedResponseTest, KeepProbabilities) {
  EXPECT_NEAR(rr_keep(0.0, 2), 0.5, 1e-15);
  EXPECT_NEAR(rr_keep(std::log(9.0), 2), 0.9, 1e-15);
  EXPECT_NEAR(rr_keep(std::log(21.0), 10), 0.7, 1e-15);
  EXPECT_EQ(rr_keep(kNoNoise, 10), 1.0);
}

}  // namespace
}  // namespace leakbench
