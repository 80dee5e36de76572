#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakbench/attacker.hpp"
#include "leakbench/harness/scenario.hpp"
#include "leakbench/leakage.hpp"

namespace leakbench::harness {

inline constexpr std::string_view kCsvHeader =
    "trial,t,query_kind,info_gain_bits,cum_mi_bits,posterior_entropy_bits,fraction_revealed,"
    "detect_score,detect_flag,action";

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string secret;
  AttackResult attack;
};

struct RunResult {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::size_t max_turns = 0;
  double prior_entropy_bits = 0.0;
  std::vector<TrialResult> trials;
  double wall_seconds = 0.0;  // not part of any export

  double success_rate() const {
    double s = 0.0;
    for (const auto& t : trials) s += t.attack.report.success ? 1.0 : 0.0;
    return trials.empty() ? 0.0 : s / static_cast<double>(trials.size());
  }

  double mean_cumulative_mi() const {
    double s = 0.0;
    for (const auto& t : trials) s += t.attack.report.cumulative_mi_bits;
    return trials.empty() ? 0.0 : s / static_cast<double>(trials.size());
  }

  double detection_rate() const {
    double s = 0.0;
    for (const auto& t : trials) s += t.attack.report.detection_events > 0 ? 1.0 : 0.0;
    return trials.empty() ? 0.0 : s / static_cast<double>(trials.size());
  }

  std::size_t total_turns() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += t.attack.report.turns_used;
    return n;
  }

  // Mean fraction revealed after turn t (1-based), holding each trial's last
  // value once it has stopped.
  std::vector<double> mean_fraction_curve() const {
    std::vector<double> curve(max_turns, 0.0);
    for (const auto& tr : trials) {
      const auto& f = tr.attack.report.fraction_revealed;
      double last = 0.0;
      for (std::size_t t = 0; t < max_turns; ++t) {
        if (t < f.size()) last = f[t];
        curve[t] += last;
      }
    }
    for (auto& c : curve) c /= static_cast<double>(trials.size());
    return curve;
  }
};

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) { return derive_seed(seed, trial); }

inline TrialResult run_trial(const Experiment& ex, std::size_t trial) {
  const auto& cfg = ex.config();
  TrialResult r;
  r.trial = trial;
  r.seed = trial_seed(cfg.seed, trial);
  Rng secret_rng(derive_seed(r.seed, 0));
  const auto secret = ex.sample_secret(secret_rng);
  r.secret = cfg.space->label(secret);
  Session session(ex.oracle(), ex.defenses(), ex.prior(), secret, derive_seed(r.seed, 1), cfg.id);
  r.attack = run_attack(cfg.policy, std::move(session), cfg.max_turns);
  return r;
}

inline RunResult run_experiment(const Experiment& ex) {
  const auto& cfg = ex.config();
  RunResult out;
  out.scenario_id = cfg.id;
  out.seed = cfg.seed;
  out.max_turns = cfg.max_turns;
  out.prior_entropy_bits = entropy(ex.prior());
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < cfg.trials; ++i) out.trials.push_back(run_trial(ex, i));
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline RunResult run_scenario(ScenarioConfig cfg) { return run_experiment(Experiment(std::move(cfg))); }

inline void write_csv(std::ostream& out, const RunResult& r) {
  out << kCsvHeader << "\n";
  for (const auto& tr : r.trials) {
    double cum = 0.0;
    const auto& turns = tr.attack.transcript.turns;
    for (const auto& t : turns) {
      cum += t.info_gain_bits;
      const double h = t.posterior_entropy_bits.value_or(r.prior_entropy_bits);
      out << tr.trial << ',' << t.t << ',' << to_string(t.query.kind) << ',' << fmt_double(t.info_gain_bits)
          << ',' << fmt_double(cum) << ',' << fmt_double(h) << ','
          << fmt_double(fraction_revealed(r.prior_entropy_bits, h)) << ',' << fmt_double(t.detect_score)
          << ',' << (t.detect_flag ? 1 : 0) << ',' << defense::to_string(t.action) << "\n";
    }
  }
}

inline nlohmann::json summary_json(const RunResult& r) {
  nlohmann::json j;
  j["scenario_id"] = r.scenario_id;
  j["seed"] = r.seed;
  j["trials"] = r.trials.size();
  j["max_turns"] = r.max_turns;
  j["prior_entropy_bits"] = r.prior_entropy_bits;
  j["success_rate"] = r.success_rate();
  double exfil = 0.0, turns = 0.0, det = 0.0;
  for (const auto& t : r.trials) {
    exfil += t.attack.report.exfil_success ? 1.0 : 0.0;
    turns += static_cast<double>(t.attack.report.turns_used);
    det += static_cast<double>(t.attack.report.detection_events);
  }
  const double n = static_cast<double>(r.trials.size());
  j["exfil_success_rate"] = exfil / n;
  j["mean_turns"] = turns / n;
  j["mean_cumulative_mi_bits"] = r.mean_cumulative_mi();
  j["detection_events"] = det;
  j["detection_rate"] = r.detection_rate();
  j["mean_fraction_revealed"] = r.mean_fraction_curve();
  auto& arr = j["per_trial"] = nlohmann::json::array();
  for (const auto& t : r.trials) {
    const auto& rep = t.attack.report;
    arr.push_back({{"trial", t.trial},
                   {"seed", t.seed},
                   {"secret", t.secret},
                   {"guess", rep.guess},
                   {"success", rep.success},
                   {"exfil_success", rep.exfil_success},
                   {"turns_used", rep.turns_used},
                   {"cumulative_mi_bits", rep.cumulative_mi_bits},
                   {"final_entropy_bits", rep.final_entropy_bits},
                   {"detection_events", rep.detection_events},
                   {"stop_reason", rep.stop_reason},
                   {"verified", t.attack.transcript.verification.has_value() &&
                                    t.attack.transcript.verification->confirmed}});
  }
  return j;
}

inline void write_exports(const RunResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
  const auto base = dir / r.scenario_id;
  std::ofstream csv(base.string() + ".csv", std::ios::binary);
  std::ofstream js(base.string() + ".json", std::ios::binary);
  if (!csv || !js) throw FileError("cannot write exports under " + dir.string());
  write_csv(csv, r);
  js << summary_json(r).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Defense comparison

struct CompareRow {
  std::string scenario_id;
  std::string defenses;
  double success_rate = 0.0;
  double mean_cumulative_mi_bits = 0.0;
  double detection_rate = 0.0;
  std::optional<double> benign_fpr;
  double ms_per_turn = 0.0;  // wall clock; varies run to run
};

inline std::string defense_label(const DefenseSettings& d) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(d.sanitizer, "sanitizer");
  add(d.spotlight, "spotlight");
  add(d.dp, "dp");
  add(d.output_filter, "output-filter");
  add(d.detector.enabled, d.detector.config.cutoff ? "detector-cutoff" : "detector");
  return s.empty() ? "none" : s;
}

inline void check_comparable(const std::vector<ScenarioConfig>& cfgs) {
  if (cfgs.size() < 2) throw ValidationError("compare needs at least two scenario configs");
  auto strip = [](nlohmann::json j) {
    j.erase("defenses");
    j.erase("id");
    j.erase("description");
    return j;
  };
  const auto ref = strip(cfgs[0].raw);
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (strip(cfgs[i].raw) != ref || cfgs[i].store_dir != cfgs[0].store_dir) {
      throw ValidationError("scenario '" + cfgs[i].id + "' differs from '" + cfgs[0].id +
                            "' in more than its defenses");
    }
  }
}

inline std::vector<CompareRow> compare_defenses(const std::vector<ScenarioConfig>& cfgs) {
  check_comparable(cfgs);
  std::vector<CompareRow> rows;
  for (const auto& cfg : cfgs) {
    const Experiment ex(cfg);
    const auto r = run_experiment(ex);
    CompareRow row;
    row.scenario_id = cfg.id;
    row.defenses = defense_label(cfg.defenses);
    row.success_rate = r.success_rate();
    row.mean_cumulative_mi_bits = r.mean_cumulative_mi();
    row.detection_rate = r.detection_rate();
    const auto& det = ex.defenses().detector;
    if (det && !cfg.defenses.detector.calibration_corpus.empty()) {
      const auto benign = read_conversations(cfg.defenses.detector.calibration_corpus);
      double flagged = 0.0, n = 0.0;
      for (const auto& c : benign) {
        if (c.attack) continue;
        n += 1.0;
        flagged += defense::conversation_score(*det, c) > det->theta ? 1.0 : 0.0;
      }
      if (n > 0.0) row.benign_fpr = flagged / n;
    }
    const auto turns = r.total_turns();
    row.ms_per_turn = turns ? 1000.0 * r.wall_seconds / static_cast<double>(turns) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "scenario,defenses,success_rate,mean_cum_mi_bits,detection_rate,benign_fpr,ms_per_turn\n";
  for (const auto& r : rows) {
    out << r.scenario_id << ',' << r.defenses << ',' << fmt_double(r.success_rate) << ','
        << fmt_double(r.mean_cumulative_mi_bits) << ',' << fmt_double(r.detection_rate) << ','
        << (r.benign_fpr ? fmt_double(*r.benign_fpr) : "") << ',' << fmt_double(r.ms_per_turn) << "\n";
  }
}

}  // namespace leakbench::harness
