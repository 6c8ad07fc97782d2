#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairhpo/datakit.hpp"
#include "fairhpo/evaluators.hpp"
#include "fairhpo/tuners.hpp"

namespace fairhpo {

enum class TunerKind { RandomSearch, Tpe, Hyperband };
enum class EvaluatorKind { Builtin, Synthetic, External };

// Declarative experiment description, parsed from a TOML file with sections
// [dataset], [space], [tuner], [metrics], [run] (+ [surface] / [external]
// for the non-builtin evaluation backends).
struct ExperimentConfig {
  std::string name;

  EvaluatorKind evaluator = EvaluatorKind::Builtin;
  std::string dataset_path;
  ColumnSchema schema;
  SplitFractions split_fractions;
  bool resplit_per_seed = false;
  std::uint64_t split_seed = 0;

  std::uint64_t surface_seed = 0;
  double surface_noise = 0.05;

  ExternalTrainerOptions external;

  SearchSpace space;

  TunerKind tuner = TunerKind::Hyperband;
  AlphaPolicy alpha_policy = AlphaPolicy::fixed(0.5);
  std::int64_t max_budget = 100;  // R
  std::int64_t eta = 3;
  std::int64_t total_budget = 2400;
  TpeOptions tpe;

  MetricSpec metrics;

  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  int workers = 1;
  std::string baseline_summary;  // optional summary.json path for KS comparisons
};

ExperimentConfig parse_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config_text(std::string_view text, const std::string& name);
void validate_experiment_config(const ExperimentConfig& config);  // throws ConfigError

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  Configuration selected;
  std::size_t selected_trial = 0;  // index into the seed's trial log
  double selection_alpha = 0.5;
  double validation_accuracy = 0.0;
  double validation_fairness = 0.0;
  bool has_test = false;
  double test_accuracy = 0.0;
  double test_fairness = 0.0;
  std::int64_t consumed_scaled = 0;
  std::int64_t budget_scale = 1;
  std::string trial_log;  // path of the written JSONL file

  double consumed_units() const {
    return static_cast<double>(consumed_scaled) / static_cast<double>(budget_scale);
  }
};

struct KsComparison {
  std::string metric;
  double d = 0.0;
  double p_value = 1.0;
};

struct RunSummary {
  std::string run_name;
  std::vector<SeedRun> seeds;
  double mean_validation_accuracy = 0.0;
  double mean_validation_fairness = 0.0;
  bool has_test = false;
  double mean_test_accuracy = 0.0;
  double mean_test_fairness = 0.0;
  std::string baseline_name;
  std::vector<KsComparison> baseline_comparisons;
};

// Runs every seed (failures are recorded, not fatal), writes one JSONL trial
// log per seed plus summary.json under the output directory. The FAIRHPO_OUT
// environment variable overrides the configured output directory.
RunSummary run_experiment(const ExperimentConfig& config);

struct TrialLog {
  std::string run;
  std::uint64_t run_seed = 0;
  std::vector<TrialRecord> trials;
};

void write_trial_log(const std::string& path, const std::string& run_name, std::uint64_t run_seed,
                     const std::vector<TrialRecord>& trials);
TrialLog read_trial_log(const std::string& path);

void write_summary(const std::string& path, const RunSummary& summary);
RunSummary read_summary(const std::string& path);

// KS test over the per-seed selected-model metric samples. Metric is one of
// validation_accuracy, validation_fairness, test_accuracy, test_fairness.
KsResult compare_runs(const RunSummary& a, const RunSummary& b, const std::string& metric);

// Fraction of each (bracket, rung) cell's trials that lie on the run's
// global Pareto frontier (successful trials only). Requires a bandit log.
struct RungDensityCell {
  int bracket = 0;
  int rung = 0;
  std::size_t trials = 0;
  std::size_t on_frontier = 0;
  double density = 0.0;
};

std::vector<RungDensityCell> rung_pareto_density(const std::vector<TrialRecord>& trials);

enum class PlotKind { Scatter, Frontier, Heatmap };

// Selected-trial markers keyed by (run name, run seed).
using SelectionIndex = std::map<std::pair<std::string, std::uint64_t>, std::size_t>;
SelectionIndex selection_index(const RunSummary& summary);

void emit_plot_data(const std::vector<TrialLog>& logs, PlotKind kind, std::ostream& out,
                    const SelectionIndex& selected = {});

// Recomputation checks backing the summary-replay guarantee: selection,
// selection alpha and consumed budget re-derived from the trial log must
// match the stored summary. Returns human-readable mismatches (empty = ok).
std::vector<std::string> verify_summary_replay(const RunSummary& summary,
                                               const std::vector<TrialLog>& logs,
                                               const AlphaPolicy& policy);

}  // namespace fairhpo
