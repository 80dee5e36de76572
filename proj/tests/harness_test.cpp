#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "leakbench/leakbench.hpp"

using namespace leakbench;
using namespace leakbench::harness;

namespace {

const std::filesystem::path kData = LEAKBENCH_DATA_DIR;

json scenario_json(const char* name) {
  std::ifstream in(kData / "scenarios" / name);
  return json::parse(in, nullptr, true, true);
}

ScenarioConfig parse(const json& j) { return parse_scenario(j, kData / "scenarios"); }

std::string config_error_path(const json& j) {
  try {
    Experiment ex(parse(j));
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

std::string csv_of(const RunResult& r) {
  std::ostringstream s;
  write_csv(s, r);
  return s.str();
}

}  // namespace

TEST(Config, MissingFieldNamesItsPath) {
  auto j = scenario_json("unprotected-9digit.json");
  j.erase("max_turns");
  EXPECT_EQ(config_error_path(j), "max_turns");
}

TEST(Config, NestedErrorsNameTheFullPath) {
  auto j = scenario_json("detection-aware-small.json");
  j["attacker"]["pool"][2]["kind"] = "telepathy";
  EXPECT_EQ(config_error_path(j), "attacker.pool[2].kind");

  j = scenario_json("backoff-9digit.json");
  j["oracle"]["rules"][0]["behavior"] = "shrug";
  EXPECT_EQ(config_error_path(j), "oracle.rules[0].behavior");

  j = scenario_json("dp-9digit.json");
  j["defenses"]["dp"]["epsilon"] = json{{"ln", -1}};
  EXPECT_EQ(config_error_path(j), "defenses.dp.epsilon.ln");

  j = scenario_json("unprotected-9digit.json");
  j["secret_doc"] = "no-such-doc";
  EXPECT_EQ(config_error_path(j), "secret_doc");

  j = scenario_json("unprotected-9digit.json");
  j["trials"] = 0;
  EXPECT_EQ(config_error_path(j), "trials");
}

TEST(Config, MissingCorpusIsAFileError) {
  auto j = scenario_json("detector-cutoff.json");
  j["defenses"]["detector"]["benign_corpus"] = "../corpus/absent.txt";
  EXPECT_THROW(Experiment(parse(j)), FileError);
  EXPECT_THROW(load_scenario(kData / "scenarios" / "absent.json"), FileError);
}

TEST(Config, DefenseOverrides) {
  auto cfg = parse(scenario_json("injection-none.json"));
  apply_override(cfg, "spotlight=on");
  apply_override(cfg, "output-filter=on");
  EXPECT_TRUE(cfg.defenses.spotlight);
  EXPECT_TRUE(cfg.defenses.output_filter);
  apply_override(cfg, "spotlight=off");
  EXPECT_FALSE(cfg.defenses.spotlight);
  EXPECT_THROW(apply_override(cfg, "moat=on"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "dp=maybe"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "dp"), ConfigError);
}

TEST(Runner, SameSeedSameExports) {
  for (const char* name : {"dp-9digit.json", "detector-cutoff.json", "injection-dp.json"}) {
    auto cfg = parse(scenario_json(name));
    cfg.trials = 3;
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(cfg);
    EXPECT_EQ(csv_of(a), csv_of(b)) << name;
    EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump()) << name;
  }
}

TEST(Runner, DifferentSeedsDiffer) {
  auto cfg = parse(scenario_json("dp-9digit.json"));
  cfg.trials = 2;
  const auto a = run_scenario(cfg);
  cfg.seed += 1;
  const auto b = run_scenario(cfg);
  EXPECT_NE(csv_of(a), csv_of(b));
}

TEST(Runner, CsvRowsAndSumsMatchSummary) {
  for (const char* name : {"dp-9digit.json", "backoff-9digit.json", "direct-detected.json"}) {
    auto cfg = parse(scenario_json(name));
    cfg.trials = 5;
    const auto r = run_scenario(cfg);
    const auto js = summary_json(r);
    std::istringstream csv(csv_of(r));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, kCsvHeader);
    std::vector<std::size_t> rows(r.trials.size(), 0);
    std::vector<double> sums(r.trials.size(), 0.0);
    while (std::getline(csv, line)) {
      std::istringstream f(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(f, cell, ',')) cells.push_back(cell);
      ASSERT_EQ(cells.size(), 10u) << line;
      const auto trial = std::stoul(cells[0]);
      ++rows[trial];
      sums[trial] += std::stod(cells[3]);
    }
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      const auto& pt = js["per_trial"][i];
      EXPECT_EQ(rows[i], pt["turns_used"].get<std::size_t>()) << name;
      EXPECT_NEAR(sums[i], pt["cumulative_mi_bits"].get<double>(), 1e-9) << name;
    }
  }
}

TEST(Runner, WritesBothExports) {
  auto cfg = parse(scenario_json("backoff-9digit.json"));
  cfg.trials = 2;
  const auto dir = std::filesystem::temp_directory_path() / "leakbench_harness_test";
  std::filesystem::remove_all(dir);
  write_exports(run_scenario(cfg), dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "backoff-9digit.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "backoff-9digit.json"));
  std::filesystem::remove_all(dir);
}

TEST(Compare, RejectsConfigsThatDifferBeyondDefenses) {
  auto a = parse(scenario_json("injection-none.json"));
  auto b = parse(scenario_json("injection-spotlight.json"));
  EXPECT_NO_THROW(check_comparable({a, b}));
  auto c = parse(scenario_json("unprotected-9digit.json"));
  EXPECT_THROW(check_comparable({a, c}), ValidationError);
  auto j = scenario_json("injection-spotlight.json");
  j["oracle"]["p_follow_injection"] = 0.5;
  EXPECT_THROW(check_comparable({a, parse(j)}), ValidationError);
  EXPECT_THROW(check_comparable({a}), ValidationError);
}

TEST(Compare, IdenticalStacksGiveIdenticalRows) {
  auto a = parse(scenario_json("injection-dp.json"));
  a.trials = 50;
  const auto rows = compare_defenses({a, a});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].defenses, "dp");
  EXPECT_EQ(rows[0].success_rate, rows[1].success_rate);
  EXPECT_EQ(rows[0].mean_cumulative_mi_bits, rows[1].mean_cumulative_mi_bits);
  EXPECT_EQ(rows[0].detection_rate, rows[1].detection_rate);
}

TEST(Corpus, RoundTrip) {
  std::vector<defense::LabeledConversation> convs(2);
  convs[0].id = "b1";
  convs[0].turns = {{"line one\nline two \\ end", std::string("ok")}, {"no answer", std::nullopt}};
  convs[1].id = "a1";
  convs[1].attack = true;
  convs[1].strategy = "digit-binary-search";
  convs[1].turns = {{"Is it true that digit 1 of the code is 5 or higher?", std::string("Yes.")}};
  std::stringstream s;
  write_conversations(s, convs);
  const auto back = parse_conversations(s, "mem");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, convs[i].id);
    EXPECT_EQ(back[i].attack, convs[i].attack);
    EXPECT_EQ(back[i].strategy, convs[i].strategy);
    ASSERT_EQ(back[i].turns.size(), convs[i].turns.size());
    for (std::size_t t = 0; t < back[i].turns.size(); ++t) {
      EXPECT_EQ(back[i].turns[t].query, convs[i].turns[t].query);
      EXPECT_EQ(back[i].turns[t].payload, convs[i].turns[t].payload);
    }
  }
}

TEST(Corpus, ParseErrorsCarryLineNumbers) {
  std::istringstream bad("## id=x label=benign\nuser: hi\nbot: hello\n");
  try {
    parse_conversations(bad, "c.txt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "c.txt:3");
  }
  std::istringstream orphan("user: hi\n");
  EXPECT_THROW(parse_conversations(orphan, "c.txt"), ConfigError);
}

TEST(Generate, DeterministicAndLabeled) {
  const auto spec = load_corpus_spec(kData / "corpus" / "eval.spec.json");
  std::stringstream a, b;
  write_conversations(a, generate_corpus(spec));
  write_conversations(b, generate_corpus(spec));
  EXPECT_EQ(a.str(), b.str());

  const auto convs = parse_conversations(a, "eval");
  std::size_t benign = 0, attack = 0;
  for (const auto& c : convs) {
    (c.attack ? attack : benign) += 1;
    if (c.strategy == "digit-binary-search") {
      const bool any_predicate = std::any_of(c.turns.begin(), c.turns.end(), [](const auto& t) {
        return t.query.rfind("Is it true that", 0) == 0;
      });
      EXPECT_TRUE(any_predicate) << c.id;
    }
  }
  EXPECT_EQ(benign, 100u);
  EXPECT_EQ(attack, 100u);
}

TEST(Generate, BenignTrafficMostlyBelowCalibratedThreshold) {
  const auto cfg = parse(scenario_json("detector-cutoff.json"));
  const Experiment ex(cfg);
  const auto& det = *ex.defenses().detector;
  auto spec = load_corpus_spec(kData / "corpus" / "eval.spec.json");
  spec.attack = 0;
  std::size_t below = 0, n = 0;
  for (const auto& c : generate_corpus(spec)) {
    ++n;
    below += defense::conversation_score(det, c) <= det.theta ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(below) / static_cast<double>(n), 0.95);
}
