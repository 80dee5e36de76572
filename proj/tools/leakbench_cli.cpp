// leakbench: run scenarios, compare defense stacks, build corpora, score
// detectors and print per-query capacities.
//
// Exit status: 0 ok, 1 bad input (config, file, usage), 2 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leakbench/leakbench.hpp"

namespace fs = std::filesystem;
using namespace leakbench;
using namespace leakbench::harness;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::vector<std::string> defenses;
};

ScenarioConfig load_with(const fs::path& path, const Overrides& o) {
  auto cfg = load_scenario(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) {
    if (*o.trials < 1) throw ConfigError("--trials", "must be >= 1");
    cfg.trials = *o.trials;
  }
  for (const auto& d : o.defenses) apply_override(cfg, d);
  return cfg;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the scenario seed");
  cmd->add_option("--trials", o.trials, "Override the number of trials");
  cmd->add_option("--defense", o.defenses, "name=on|off; names: sanitizer spotlight dp output-filter detector cutoff")
      ->take_all();
}

void print_summary(const RunResult& r) {
  std::printf("%s: %zu trials, seed %llu\n", r.scenario_id.c_str(), r.trials.size(),
              static_cast<unsigned long long>(r.seed));
  std::printf("  success rate        %.4f\n", r.success_rate());
  std::printf("  mean cumulative MI  %.4f bits (prior %.4f)\n", r.mean_cumulative_mi(), r.prior_entropy_bits);
  std::printf("  detection rate      %.4f\n", r.detection_rate());
  std::printf("  fraction revealed  ");
  for (double f : r.mean_fraction_curve()) std::printf(" %.3f", f);
  std::printf("\n");
}

int cmd_run(const fs::path& config, const Overrides& o, const fs::path& out) {
  const auto r = run_scenario(load_with(config, o));
  write_exports(r, out);
  print_summary(r);
  std::printf("  wrote %s.{csv,json}\n", (out / r.scenario_id).string().c_str());
  return 0;
}

int cmd_compare(const std::vector<fs::path>& configs, const Overrides& o, const fs::path& out) {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& c : configs) cfgs.push_back(load_with(c, o));
  const auto rows = compare_defenses(cfgs);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw FileError("cannot create " + out.string() + ": " + ec.message());
  const auto path = out / "compare.csv";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write " + path.string());
  write_compare_csv(f, rows);
  write_compare_csv(std::cout, rows);
  return 0;
}

int cmd_gen_corpus(const fs::path& spec_path, std::optional<std::uint64_t> seed, const fs::path& out) {
  auto spec = load_corpus_spec(spec_path);
  if (seed) spec.seed = *seed;
  const auto convs = generate_corpus(spec);
  std::string stem = spec_path.filename().string();
  for (const char* ext : {".spec.json", ".json"}) {
    const std::string e(ext);
    if (stem.size() > e.size() && stem.compare(stem.size() - e.size(), e.size(), e) == 0) {
      stem.resize(stem.size() - e.size());
      break;
    }
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw FileError("cannot create " + out.string() + ": " + ec.message());
  const auto path = out / (stem + ".txt");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write " + path.string());
  f << "# generated by leakbench gen-corpus from " << spec_path.filename().string() << ", seed " << spec.seed
    << "\n";
  write_conversations(f, convs);
  std::size_t attacks = 0;
  for (const auto& c : convs) attacks += c.attack ? 1 : 0;
  std::printf("wrote %s (%zu benign, %zu attack)\n", path.string().c_str(), convs.size() - attacks, attacks);
  return 0;
}

void write_roc_csv(std::ostream& out, const std::string& name, const defense::RocResult& r) {
  for (const auto& p : r.curve) {
    out << name << ',' << fmt_double(p.threshold) << ',' << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << "\n";
  }
}

int cmd_roc(const fs::path& config, const fs::path& corpus, const Overrides& o, const fs::path& out) {
  auto cfg = load_with(config, o);
  if (!cfg.defenses.detector.enabled) throw ConfigError("defenses.detector.enabled", "roc needs a detector");
  const auto store = DocumentStore::load(cfg.store_dir);
  const auto det = Experiment::build_detector(cfg.defenses.detector, store);
  const auto base = defense::DetectorConfig::keyword_baseline(det);
  const auto convs = read_conversations(corpus);
  const auto rf = defense::roc_evaluate(det, convs);
  const auto rk = defense::roc_evaluate(base, convs);
  std::printf("detector,tpr_at_tnr90,tpr_at_tnr95,auroc\n");
  std::printf("features,%.4f,%.4f,%.4f\n", rf.tpr_at_tnr90, rf.tpr_at_tnr95, rf.auroc);
  std::printf("keyword-baseline,%.4f,%.4f,%.4f\n", rk.tpr_at_tnr90, rk.tpr_at_tnr95, rk.auroc);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw FileError("cannot create " + out.string() + ": " + ec.message());
  std::ofstream f(out / "roc.csv", std::ios::binary);
  if (!f) throw FileError("cannot write " + (out / "roc.csv").string());
  f << "detector,threshold,fpr,tpr\n";
  write_roc_csv(f, "features", rf);
  write_roc_csv(f, "keyword-baseline", rk);
  return 0;
}

// Capacity of every query the scenario's attacker could open with, as the
// recipient sees it (after output filtering).
int cmd_capacity(const fs::path& config, const Overrides& o) {
  const Experiment ex(load_with(config, o));
  const auto& cfg = ex.config();
  const Session s(ex.oracle(), ex.defenses(), ex.prior(), 0, derive_seed(cfg.seed, 0), cfg.id);
  std::vector<Query> qs = expand_pool(cfg.policy.pool, *cfg.space, ex.prior());
  if (qs.empty()) qs.push_back(next_query(cfg.policy, s));
  std::printf("query_kind,framing,family,capacity_bits,text\n");
  for (const auto& q : qs) {
    const auto p = s.prepare(q);
    const double c = p.action == defense::Action::terminate ? 0.0 : channel_capacity(*cfg.space, p.recipient);
    std::printf("%s,%s,%s,%.6f,\"%s\"\n", std::string(to_string(q.kind)).c_str(),
                std::string(to_string(q.framing)).c_str(), std::string(to_string(q.predicate.family)).c_str(), c,
                p.clean_text.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-turn secret leakage benchmark"};
  app.require_subcommand(1);

  Overrides o;
  fs::path out = "results";
  fs::path config;
  std::vector<fs::path> configs;
  fs::path corpus;

  auto* run = app.add_subcommand("run", "Run a scenario and write <id>.csv and <id>.json");
  run->add_option("--config", config, "Scenario file")->required();
  run->add_option("--out", out, "Output directory");
  add_overrides(run, o);

  auto* compare = app.add_subcommand("compare", "Compare scenarios that differ only in their defenses");
  compare->add_option("--config", configs, "Scenario files (two or more)")->required();
  compare->add_option("--out", out, "Output directory");
  add_overrides(compare, o);

  auto* gen = app.add_subcommand("gen-corpus", "Generate a labeled conversation corpus");
  gen->add_option("--config", config, "Corpus spec")->required();
  gen->add_option("--seed", o.seed, "Override the spec seed");
  gen->add_option("--out", out, "Output directory");

  auto* roc = app.add_subcommand("roc", "ROC of the scenario's detector and the keyword baseline");
  roc->add_option("--config", config, "Scenario file with a detector")->required();
  roc->add_option("--corpus", corpus, "Labeled conversation file")->required();
  roc->add_option("--out", out, "Output directory");
  add_overrides(roc, o);

  auto* cap = app.add_subcommand("capacity", "Per-query channel capacity for a scenario's candidate pool");
  cap->add_option("--config", config, "Scenario file")->required();
  add_overrides(cap, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(config, o, out);
    if (*compare) return cmd_compare(configs, o, out);
    if (*gen) return cmd_gen_corpus(config, o.seed, out);
    if (*roc) return cmd_roc(config, corpus, o, out);
    if (*cap) return cmd_capacity(config, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const FileError& e) {
    std::fprintf(stderr, "file error: %s\n", e.what());
    return 1;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
