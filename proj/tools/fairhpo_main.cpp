#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairhpo/errors.hpp"
#include "fairhpo/harness.hpp"
#include "fairhpo/tuners.hpp"

namespace {

using namespace fairhpo;
namespace fs = std::filesystem;

void print_schedule(const BracketSchedule& schedule) {
  std::printf("Hyperband schedule: R=%lld, eta=%lld, s_max=%d\n",
              static_cast<long long>(schedule.max_budget), static_cast<long long>(schedule.eta),
              schedule.s_max);
  std::printf("%4s", "i");
  for (const BracketSpec& bracket : schedule.brackets)
    std::printf(" | s=%-2d %5s %8s", bracket.s, "n_i", "r_i");
  std::printf("\n");
  std::size_t max_rungs = 0;
  for (const BracketSpec& bracket : schedule.brackets)
    max_rungs = std::max(max_rungs, bracket.rungs.size());
  for (std::size_t i = 0; i < max_rungs; ++i) {
    std::printf("%4zu", i);
    for (const BracketSpec& bracket : schedule.brackets) {
      if (i < bracket.rungs.size()) {
        const RungSpec& rung = bracket.rungs[i];
        std::printf(" |      %5lld %8.2f", static_cast<long long>(rung.n), rung.budget_units);
      } else {
        std::printf(" |      %5s %8s", "", "");
      }
    }
    std::printf("\n");
  }
  std::printf("total budget: %.4f units\n", schedule.total_units());
}

void print_summary(const RunSummary& summary) {
  std::printf("run: %s\n", summary.run_name.c_str());
  for (const SeedRun& seed : summary.seeds) {
    if (!seed.ok) {
      std::printf("  seed %llu: FAILED (%s)\n", static_cast<unsigned long long>(seed.seed),
                  seed.error.c_str());
      continue;
    }
    std::printf("  seed %llu: config %lld  alpha=%.4f  val(a=%.4f f=%.4f)",
                static_cast<unsigned long long>(seed.seed),
                static_cast<long long>(seed.selected.id), seed.selection_alpha,
                seed.validation_accuracy, seed.validation_fairness);
    if (seed.has_test) std::printf("  test(a=%.4f f=%.4f)", seed.test_accuracy, seed.test_fairness);
    std::printf("  budget=%.2f\n", seed.consumed_units());
  }
  std::printf("means: validation a=%.4f f=%.4f", summary.mean_validation_accuracy,
              summary.mean_validation_fairness);
  if (summary.has_test)
    std::printf("  test a=%.4f f=%.4f", summary.mean_test_accuracy, summary.mean_test_fairness);
  std::printf("\n");
  if (!summary.baseline_name.empty()) {
    std::printf("KS vs %s:\n", summary.baseline_name.c_str());
    for (const KsComparison& c : summary.baseline_comparisons)
      std::printf("  %-22s D=%.4f p=%.6f\n", c.metric.c_str(), c.d, c.p_value);
  }
}

SelectionIndex load_selections(const std::vector<std::string>& log_paths,
                               const std::vector<std::string>& summary_paths) {
  SelectionIndex index;
  std::vector<std::string> candidates = summary_paths;
  for (const std::string& log_path : log_paths) {
    const fs::path sibling = fs::path(log_path).parent_path() / "summary.json";
    if (fs::exists(sibling)) candidates.push_back(sibling.string());
  }
  for (const std::string& path : candidates) {
    try {
      const SelectionIndex one = selection_index(read_summary(path));
      index.insert(one.begin(), one.end());
    } catch (const std::exception&) {
      // a sibling summary that does not parse is not fatal for plotting
    }
  }
  return index;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"fairness-aware hyperparameter optimization"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  std::string run_config;
  run_cmd->add_option("config", run_config, "experiment config (TOML)")->required();

  auto* validate_cmd = app.add_subcommand("validate", "validate an experiment config");
  std::string validate_config;
  validate_cmd->add_option("config", validate_config, "experiment config (TOML)")->required();

  auto* schedule_cmd = app.add_subcommand("schedule", "print the Hyperband bracket table");
  std::int64_t max_budget = 100, eta = 3;
  schedule_cmd->add_option("--max-budget", max_budget, "maximum budget per configuration (R)")
      ->required();
  schedule_cmd->add_option("--eta", eta, "budget increase ratio")->required();

  auto* pareto_cmd = app.add_subcommand("pareto", "Pareto frontier over trial logs");
  std::vector<std::string> pareto_logs;
  pareto_cmd->add_option("logs", pareto_logs, "trial logs (JSONL)")->required();

  auto* compare_cmd = app.add_subcommand("compare", "KS test between two run summaries");
  std::string summary_a, summary_b, metric = "validation_fairness";
  compare_cmd->add_option("summaryA", summary_a, "first summary.json")->required();
  compare_cmd->add_option("summaryB", summary_b, "second summary.json")->required();
  compare_cmd->add_option("--metric", metric,
                          "validation_accuracy | validation_fairness | test_accuracy | "
                          "test_fairness");

  auto* plot_cmd = app.add_subcommand("plot-data", "emit plot tables from trial logs");
  std::vector<std::string> plot_logs, plot_summaries;
  std::string plot_kind = "scatter", plot_out;
  plot_cmd->add_option("logs", plot_logs, "trial logs (JSONL)")->required();
  plot_cmd->add_option("--kind", plot_kind, "scatter | frontier | heatmap");
  plot_cmd->add_option("--out", plot_out, "output CSV path")->required();
  plot_cmd->add_option("--summary", plot_summaries, "summary.json files for selected-model flags");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    const ExperimentConfig config = parse_experiment_config(run_config);
    const RunSummary summary = run_experiment(config);
    print_summary(summary);
    for (const SeedRun& seed : summary.seeds)
      if (!seed.ok) throw HarnessError("seed " + std::to_string(seed.seed) + " failed");
    return 0;
  }
  if (validate_cmd->parsed()) {
    parse_experiment_config(validate_config);
    std::printf("OK\n");
    return 0;
  }
  if (schedule_cmd->parsed()) {
    print_schedule(bracket_schedule(max_budget, eta));
    return 0;
  }
  if (pareto_cmd->parsed()) {
    std::vector<TrialLog> logs;
    for (const std::string& path : pareto_logs) logs.push_back(read_trial_log(path));
    emit_plot_data(logs, PlotKind::Frontier, std::cout, load_selections(pareto_logs, {}));
    return 0;
  }
  if (compare_cmd->parsed()) {
    const KsResult ks = compare_runs(read_summary(summary_a), read_summary(summary_b), metric);
    std::printf("metric=%s D=%.6f p=%.8f\n", metric.c_str(), ks.d, ks.p_value);
    return 0;
  }
  if (plot_cmd->parsed()) {
    PlotKind kind;
    if (plot_kind == "scatter") kind = PlotKind::Scatter;
    else if (plot_kind == "frontier") kind = PlotKind::Frontier;
    else if (plot_kind == "heatmap") kind = PlotKind::Heatmap;
    else throw ConfigError("unknown plot kind '" + plot_kind + "'");
    std::vector<TrialLog> logs;
    for (const std::string& path : plot_logs) logs.push_back(read_trial_log(path));
    std::ofstream out(plot_out, std::ios::binary | std::ios::trunc);
    if (!out) throw HarnessError("cannot write " + plot_out);
    emit_plot_data(logs, kind, out, load_selections(plot_logs, plot_summaries));
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const fairhpo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
