#include "fairhpo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairhpo/errors.hpp"
#include "fairhpo/toml.hpp"

namespace fairhpo {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ParamValue json_to_param_value(const ordered_json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw HarnessError("trial log: unsupported assignment value type");
}

ordered_json param_value_to_json(const ParamValue& value) {
  if (const double* d = std::get_if<double>(&value)) return *d;
  if (const std::int64_t* i = std::get_if<std::int64_t>(&value)) return *i;
  return std::get<std::string>(value);
}

ordered_json config_to_json(const Configuration& config) {
  ordered_json j;
  j["id"] = config.id;
  ordered_json assignments = ordered_json::object();
  for (const auto& [name, value] : config.assignments)
    assignments[name] = param_value_to_json(value);
  j["assignments"] = std::move(assignments);
  return j;
}

Configuration config_from_json(const ordered_json& j) {
  Configuration config;
  config.id = j.at("id").get<std::int64_t>();
  for (const auto& [name, value] : j.at("assignments").items())
    config.assignments[name] = json_to_param_value(value);
  return config;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

TunerKind parse_tuner_kind(const std::string& name) {
  if (name == "rs" || name == "random-search") return TunerKind::RandomSearch;
  if (name == "tpe") return TunerKind::Tpe;
  if (name == "hyperband") return TunerKind::Hyperband;
  throw ConfigError("[tuner] unknown algorithm '" + name + "' (rs | tpe | hyperband)");
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config_text(buf.str(), fs::path(path).stem().string());
}

ExperimentConfig parse_experiment_config_text(std::string_view text, const std::string& name) {
  const toml::Value doc = toml::parse(text);
  ExperimentConfig config;
  config.name = name;

  if (const toml::Value* dataset = doc.find("dataset")) {
    config.dataset_path = toml::get_string_or(*dataset, "path", "");
    config.schema.label_column = toml::get_string_or(*dataset, "label", "");
    config.schema.sensitive_column = toml::get_string_or(*dataset, "sensitive", "");
    if (dataset->find("features") != nullptr)
      config.schema.feature_columns = toml::get_string_array(*dataset, "features", "dataset");
    if (dataset->find("categorical") != nullptr)
      config.schema.categorical_columns =
          toml::get_string_array(*dataset, "categorical", "dataset");
    if (dataset->find("sensitive_bins") != nullptr)
      config.schema.sensitive_bins = toml::get_double_array(*dataset, "sensitive_bins", "dataset");
    if (dataset->find("split") != nullptr) {
      const auto split = toml::get_double_array(*dataset, "split", "dataset");
      if (split.size() != 3)
        throw ConfigError("[dataset] split must have three fractions (train, val, test)");
      config.split_fractions = {split[0], split[1], split[2]};
    }
    const std::string mode = toml::get_string_or(*dataset, "split_mode", "fixed");
    if (mode == "fixed") config.resplit_per_seed = false;
    else if (mode == "per-seed") config.resplit_per_seed = true;
    else throw ConfigError("[dataset] split_mode must be 'fixed' or 'per-seed'");
    config.split_seed = static_cast<std::uint64_t>(toml::get_int_or(*dataset, "split_seed", 0));
  }

  const toml::Value* space = doc.find("space");
  if (space == nullptr) throw ConfigError("missing [space] section");
  config.space = parse_space(*space);

  const toml::Value* tuner = doc.find("tuner");
  if (tuner == nullptr) throw ConfigError("missing [tuner] section");
  config.tuner = parse_tuner_kind(toml::get_string(*tuner, "algorithm", "tuner"));
  const std::string fairness_mode = toml::get_string_or(*tuner, "fairness", "static");
  if (fairness_mode == "blind") {
    config.alpha_policy = AlphaPolicy::fixed(1.0);
  } else if (fairness_mode == "static") {
    config.alpha_policy = AlphaPolicy::fixed(toml::get_double_or(*tuner, "alpha", 0.5));
  } else if (fairness_mode == "auto") {
    config.alpha_policy = AlphaPolicy::automatic();
  } else {
    throw ConfigError("[tuner] fairness must be 'blind', 'static' or 'auto'");
  }
  config.max_budget = toml::get_int_or(*tuner, "max_budget", 100);
  config.eta = toml::get_int_or(*tuner, "eta", 3);
  if (tuner->find("total_budget") != nullptr) {
    config.total_budget = toml::get_int(*tuner, "total_budget", "tuner");
  } else if (config.tuner == TunerKind::Hyperband) {
    config.total_budget = static_cast<std::int64_t>(
        std::ceil(bracket_schedule(config.max_budget, config.eta).total_units()));
  } else {
    throw ConfigError("[tuner] total_budget is required for rs/tpe");
  }
  config.tpe.gamma = toml::get_double_or(*tuner, "tpe_gamma", config.tpe.gamma);
  config.tpe.n_candidates =
      static_cast<int>(toml::get_int_or(*tuner, "tpe_candidates", config.tpe.n_candidates));
  config.tpe.warmup = static_cast<int>(toml::get_int_or(*tuner, "tpe_warmup", config.tpe.warmup));

  const toml::Value* metrics = doc.find("metrics");
  if (metrics == nullptr) throw ConfigError("missing [metrics] section");
  const std::string accuracy = toml::get_string(*metrics, "accuracy", "metrics");
  if (accuracy == "recall") config.metrics.accuracy = AccuracyKind::Recall;
  else if (accuracy == "precision") config.metrics.accuracy = AccuracyKind::Precision;
  else throw ConfigError("[metrics] accuracy must be 'recall' or 'precision'");
  const std::string fairness = toml::get_string(*metrics, "fairness", "metrics");
  if (fairness == "predictive_equality")
    config.metrics.fairness = FairnessKind::PredictiveEquality;
  else if (fairness == "equal_opportunity")
    config.metrics.fairness = FairnessKind::EqualOpportunity;
  else
    throw ConfigError("[metrics] fairness must be 'predictive_equality' or 'equal_opportunity'");
  const std::string threshold = toml::get_string(*metrics, "threshold", "metrics");
  if (threshold == "fpr_at")
    config.metrics.threshold = ThresholdTarget::fpr_at(toml::get_double(*metrics, "value", "metrics"));
  else if (threshold == "recall_at")
    config.metrics.threshold =
        ThresholdTarget::recall_at(toml::get_double(*metrics, "value", "metrics"));
  else if (threshold == "top_k")
    config.metrics.threshold = ThresholdTarget::top_k(toml::get_int(*metrics, "k", "metrics"));
  else
    throw ConfigError("[metrics] threshold must be 'fpr_at', 'recall_at' or 'top_k'");
  config.metrics.min_support = toml::get_int_or(*metrics, "min_support", 10);

  const toml::Value* run = doc.find("run");
  if (run == nullptr) throw ConfigError("missing [run] section");
  for (std::int64_t s : toml::get_int_array(*run, "seeds", "run"))
    config.seeds.push_back(static_cast<std::uint64_t>(s));
  config.output_dir = toml::get_string(*run, "output_dir", "run");
  config.workers = static_cast<int>(toml::get_int_or(*run, "workers", 1));
  config.baseline_summary = toml::get_string_or(*run, "baseline_summary", "");
  std::string evaluator = toml::get_string_or(*run, "evaluator", "");
  if (evaluator.empty()) evaluator = config.dataset_path.empty() ? "synthetic" : "builtin";
  if (evaluator == "builtin") config.evaluator = EvaluatorKind::Builtin;
  else if (evaluator == "synthetic") config.evaluator = EvaluatorKind::Synthetic;
  else if (evaluator == "external") config.evaluator = EvaluatorKind::External;
  else throw ConfigError("[run] evaluator must be 'builtin', 'synthetic' or 'external'");

  if (const toml::Value* surface = doc.find("surface")) {
    config.surface_seed = static_cast<std::uint64_t>(toml::get_int_or(*surface, "seed", 0));
    config.surface_noise = toml::get_double_or(*surface, "noise", 0.05);
  }
  if (const toml::Value* external = doc.find("external")) {
    config.external.command = toml::get_string(*external, "command", "external");
    config.external.workers = static_cast<int>(toml::get_int_or(*external, "workers", 1));
    config.external.timeout_seconds =
        toml::get_double_or(*external, "timeout_seconds", config.external.timeout_seconds);
  }

  validate_experiment_config(config);
  return config;
}

void validate_experiment_config(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw ConfigError("[run] seeds must not be empty");
  if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() !=
      config.seeds.size())
    throw ConfigError("[run] seeds must be unique");
  if (config.output_dir.empty()) throw ConfigError("[run] output_dir must not be empty");
  if (config.workers < 1) throw ConfigError("[run] workers must be >= 1");
  if (config.max_budget < 1) throw ConfigError("[tuner] max_budget must be >= 1");
  if (static_cast<double>(config.max_budget) > kBudgetUnitsPerFullData + 1e-12)
    throw ConfigError("[tuner] max_budget must be <= 100 units (one unit is 1% of the data)");
  if (config.alpha_policy.mode == AlphaPolicy::Mode::Auto &&
      config.tuner != TunerKind::Hyperband)
    throw ConfigError("[tuner] fairness='auto' is only supported with hyperband");
  if (config.tuner == TunerKind::Hyperband) {
    if (config.eta < 2) throw ConfigError("[tuner] eta must be >= 2");
    const BracketSchedule schedule = bracket_schedule(config.max_budget, config.eta);
    if (schedule.total_units() >
        static_cast<double>(config.total_budget + config.max_budget) + 1e-9)
      throw ConfigError("[tuner] hyperband schedule needs " +
                        std::to_string(schedule.total_units()) +
                        " units, more than total_budget + R");
  } else if (config.total_budget < config.max_budget) {
    throw ConfigError("[tuner] total_budget must be >= max_budget");
  }
  if (config.evaluator == EvaluatorKind::Builtin) {
    if (config.dataset_path.empty()) throw ConfigError("[dataset] path required for builtin runs");
    if (config.schema.label_column.empty() || config.schema.sensitive_column.empty())
      throw ConfigError("[dataset] label and sensitive columns are required");
  }
  if (config.evaluator == EvaluatorKind::External && config.external.command.empty())
    throw ConfigError("[external] command required for external runs");
}

// ---------------------------------------------------------------------------
// Trial log IO
// ---------------------------------------------------------------------------

void write_trial_log(const std::string& path, const std::string& run_name, std::uint64_t run_seed,
                     const std::vector<TrialRecord>& trials) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw HarnessError("cannot write trial log: " + path);
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const TrialRecord& trial = trials[t];
    ordered_json j;
    j["run"] = run_name;
    j["run_seed"] = run_seed;
    j["trial"] = t;
    j["config"] = config_to_json(trial.config);
    j["budget"] = trial.budget_units;
    if (trial.failed) {
      j["accuracy"] = nullptr;
      j["fairness"] = nullptr;
    } else {
      j["accuracy"] = trial.accuracy;
      j["fairness"] = trial.fairness;
    }
    j["alpha_used"] = trial.alpha_used;
    if (trial.failed) j["goal"] = nullptr;
    else j["goal"] = trial.goal;
    j["bracket"] = trial.bracket;
    j["rung"] = trial.rung;
    j["seed"] = trial.seed;
    j["status"] = trial.failed ? "failed" : "ok";
    if (trial.failed) j["error"] = trial.error;
    out << j.dump() << '\n';
  }
}

TrialLog read_trial_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot read trial log: " + path);
  TrialLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const ordered_json j = ordered_json::parse(line);
      if (lineno == 1) {
        log.run = j.at("run").get<std::string>();
        log.run_seed = j.at("run_seed").get<std::uint64_t>();
      }
      TrialRecord trial;
      trial.config = config_from_json(j.at("config"));
      trial.budget_units = j.at("budget").get<double>();
      trial.failed = j.at("status").get<std::string>() == "failed";
      if (!trial.failed) {
        trial.accuracy = j.at("accuracy").get<double>();
        trial.fairness = j.at("fairness").get<double>();
        trial.goal = j.at("goal").get<double>();
      } else {
        trial.goal = std::numeric_limits<double>::quiet_NaN();
        if (j.contains("error")) trial.error = j.at("error").get<std::string>();
      }
      trial.alpha_used = j.at("alpha_used").get<double>();
      trial.bracket = j.at("bracket").get<int>();
      trial.rung = j.at("rung").get<int>();
      trial.seed = j.at("seed").get<std::uint64_t>();
      log.trials.push_back(std::move(trial));
    } catch (const nlohmann::json::exception& e) {
      throw HarnessError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Summary IO
// ---------------------------------------------------------------------------

void write_summary(const std::string& path, const RunSummary& summary) {
  ordered_json j;
  j["run"] = summary.run_name;
  ordered_json seeds = ordered_json::array();
  for (const SeedRun& seed : summary.seeds) {
    ordered_json s;
    s["seed"] = seed.seed;
    s["ok"] = seed.ok;
    if (!seed.ok) {
      s["error"] = seed.error;
    } else {
      s["selected"] = config_to_json(seed.selected);
      s["selected_trial"] = seed.selected_trial;
      s["selection_alpha"] = seed.selection_alpha;
      s["validation_accuracy"] = seed.validation_accuracy;
      s["validation_fairness"] = seed.validation_fairness;
      s["has_test"] = seed.has_test;
      if (seed.has_test) {
        s["test_accuracy"] = seed.test_accuracy;
        s["test_fairness"] = seed.test_fairness;
      }
      s["consumed_scaled"] = seed.consumed_scaled;
      s["budget_scale"] = seed.budget_scale;
      s["trial_log"] = seed.trial_log;
    }
    seeds.push_back(std::move(s));
  }
  j["seeds"] = std::move(seeds);
  ordered_json agg;
  agg["validation_accuracy"] = summary.mean_validation_accuracy;
  agg["validation_fairness"] = summary.mean_validation_fairness;
  agg["has_test"] = summary.has_test;
  if (summary.has_test) {
    agg["test_accuracy"] = summary.mean_test_accuracy;
    agg["test_fairness"] = summary.mean_test_fairness;
  }
  j["aggregates"] = std::move(agg);
  if (!summary.baseline_name.empty()) {
    ordered_json baseline;
    baseline["name"] = summary.baseline_name;
    ordered_json comparisons = ordered_json::array();
    for (const KsComparison& c : summary.baseline_comparisons) {
      ordered_json e;
      e["metric"] = c.metric;
      e["d"] = c.d;
      e["p"] = c.p_value;
      comparisons.push_back(std::move(e));
    }
    baseline["comparisons"] = std::move(comparisons);
    j["baseline"] = std::move(baseline);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw HarnessError("cannot write summary: " + path);
  out << j.dump(2) << '\n';
}

RunSummary read_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot read summary: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(path + ": " + e.what());
  }
  RunSummary summary;
  summary.run_name = j.at("run").get<std::string>();
  for (const auto& s : j.at("seeds")) {
    SeedRun seed;
    seed.seed = s.at("seed").get<std::uint64_t>();
    seed.ok = s.at("ok").get<bool>();
    if (!seed.ok) {
      seed.error = s.value("error", "");
    } else {
      seed.selected = config_from_json(s.at("selected"));
      seed.selected_trial = s.at("selected_trial").get<std::size_t>();
      seed.selection_alpha = s.at("selection_alpha").get<double>();
      seed.validation_accuracy = s.at("validation_accuracy").get<double>();
      seed.validation_fairness = s.at("validation_fairness").get<double>();
      seed.has_test = s.at("has_test").get<bool>();
      if (seed.has_test) {
        seed.test_accuracy = s.at("test_accuracy").get<double>();
        seed.test_fairness = s.at("test_fairness").get<double>();
      }
      seed.consumed_scaled = s.at("consumed_scaled").get<std::int64_t>();
      seed.budget_scale = s.at("budget_scale").get<std::int64_t>();
      seed.trial_log = s.value("trial_log", "");
    }
    summary.seeds.push_back(std::move(seed));
  }
  const auto& agg = j.at("aggregates");
  summary.mean_validation_accuracy = agg.at("validation_accuracy").get<double>();
  summary.mean_validation_fairness = agg.at("validation_fairness").get<double>();
  summary.has_test = agg.at("has_test").get<bool>();
  if (summary.has_test) {
    summary.mean_test_accuracy = agg.at("test_accuracy").get<double>();
    summary.mean_test_fairness = agg.at("test_fairness").get<double>();
  }
  if (j.contains("baseline")) {
    summary.baseline_name = j.at("baseline").at("name").get<std::string>();
    for (const auto& c : j.at("baseline").at("comparisons")) {
      KsComparison comparison;
      comparison.metric = c.at("metric").get<std::string>();
      comparison.d = c.at("d").get<double>();
      comparison.p_value = c.at("p").get<double>();
      summary.baseline_comparisons.push_back(std::move(comparison));
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

namespace {

std::vector<double> slice_fractions_for(const ExperimentConfig& config) {
  std::vector<double> fractions;
  if (config.tuner == TunerKind::Hyperband) {
    const BracketSchedule schedule = bracket_schedule(config.max_budget, config.eta);
    for (const BracketSpec& bracket : schedule.brackets)
      for (const RungSpec& rung : bracket.rungs)
        fractions.push_back(rung.budget_units / kBudgetUnitsPerFullData);
  } else {
    fractions.push_back(static_cast<double>(config.max_budget) / kBudgetUnitsPerFullData);
  }
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  return fractions;
}

std::vector<std::string> undersampling_options_for(const SearchSpace& space) {
  for (const ParamSpec& p : space.root_params)
    if (p.name == "undersampling" && p.kind == ParamKind::Categorical) return p.categories;
  return {"none"};
}

TunerResult run_tuner_for_seed(const ExperimentConfig& config, const Evaluator& evaluator,
                               std::uint64_t seed) {
  switch (config.tuner) {
    case TunerKind::RandomSearch:
      return run_random_search(config.space, evaluator, config.total_budget, config.max_budget,
                               config.alpha_policy.value, seed, config.metrics, config.workers);
    case TunerKind::Tpe:
      return run_tpe(config.space, evaluator, config.total_budget, config.max_budget,
                     config.alpha_policy, seed, config.metrics, config.tpe);
    case TunerKind::Hyperband:
      return run_fairband(config.space, evaluator, config.max_budget, config.eta,
                          config.alpha_policy, seed, config.metrics, config.workers);
  }
  throw HarnessError("unknown tuner kind");
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) {
  validate_experiment_config(config);

  std::string output_dir = config.output_dir;
  if (const char* env = std::getenv("FAIRHPO_OUT"); env != nullptr && *env != '\0')
    output_dir = env;
  fs::create_directories(output_dir);

  RunSummary summary;
  summary.run_name = config.name;

  // Shared, seed-independent state.
  std::optional<Dataset> full;
  std::optional<SplitResult> fixed_split;
  if (config.evaluator == EvaluatorKind::Builtin) {
    full = load_csv(config.dataset_path, config.schema);
    if (!config.resplit_per_seed)
      fixed_split = split(*full, config.split_fractions, derive_stream(config.split_seed, "split"));
  }
  std::optional<SyntheticEvaluator> synthetic;
  if (config.evaluator == EvaluatorKind::Synthetic)
    synthetic.emplace(random_surface(config.space, config.surface_seed, config.surface_noise));
  std::optional<ExternalEvaluator> external;
  if (config.evaluator == EvaluatorKind::External) external.emplace(config.external);

  const double full_fraction = static_cast<double>(config.max_budget) / kBudgetUnitsPerFullData;

  for (std::uint64_t seed : config.seeds) {
    SeedRun seed_run;
    seed_run.seed = seed;
    try {
      TunerResult result;
      std::optional<FinalEvaluator::Report> final_report;
      std::optional<EvaluationResult> final_simple;
      Selection selection;

      if (config.evaluator == EvaluatorKind::Builtin) {
        const SplitResult* parts = fixed_split ? &*fixed_split : nullptr;
        std::optional<SplitResult> local;
        if (parts == nullptr) {
          local = split(*full, config.split_fractions, derive_stream(seed, "split"));
          parts = &*local;
        }
        BuiltinEvaluator evaluator(parts->train, parts->val, slice_fractions_for(config),
                                   derive_stream(seed, "data"),
                                   undersampling_options_for(config.space));
        result = run_tuner_for_seed(config, evaluator, seed);
        selection = select_model(result.trials, config.alpha_policy);
        const FinalEvaluator finals(evaluator, parts->test);
        final_report =
            finals.evaluate(selection.config, result.trials[selection.trial_index].seed,
                            config.metrics);
      } else {
        const Evaluator& evaluator = config.evaluator == EvaluatorKind::Synthetic
                                         ? static_cast<const Evaluator&>(*synthetic)
                                         : static_cast<const Evaluator&>(*external);
        result = run_tuner_for_seed(config, evaluator, seed);
        selection = select_model(result.trials, config.alpha_policy);
        EvaluationRequest final_request{selection.config, full_fraction,
                                        result.trials[selection.trial_index].seed, config.metrics};
        const EvalOutcome outcome = evaluator.evaluate(final_request);
        if (!outcome.ok) throw HarnessError("final evaluation failed: " + outcome.error);
        final_simple = outcome.result;
      }

      const std::string log_path =
          (fs::path(output_dir) / ("trials_seed" + std::to_string(seed) + ".jsonl")).string();
      write_trial_log(log_path, config.name, seed, result.trials);

      seed_run.ok = true;
      seed_run.selected = selection.config;
      seed_run.selected_trial = selection.trial_index;
      seed_run.selection_alpha = selection.alpha;
      seed_run.consumed_scaled = result.consumed_scaled;
      seed_run.budget_scale = result.budget_scale;
      seed_run.trial_log = log_path;
      if (final_report) {
        seed_run.validation_accuracy = final_report->validation.accuracy;
        seed_run.validation_fairness = final_report->validation.fairness;
        seed_run.has_test = true;
        seed_run.test_accuracy = final_report->test.accuracy;
        seed_run.test_fairness = final_report->test.fairness;
      } else {
        seed_run.validation_accuracy = final_simple->accuracy;
        seed_run.validation_fairness = final_simple->fairness;
        seed_run.has_test = false;
      }
    } catch (const std::exception& e) {
      seed_run.ok = false;
      seed_run.error = e.what();
    }
    summary.seeds.push_back(std::move(seed_run));
  }

  double sum_va = 0.0, sum_vf = 0.0, sum_ta = 0.0, sum_tf = 0.0;
  std::size_t ok_count = 0, test_count = 0;
  for (const SeedRun& seed_run : summary.seeds) {
    if (!seed_run.ok) continue;
    ++ok_count;
    sum_va += seed_run.validation_accuracy;
    sum_vf += seed_run.validation_fairness;
    if (seed_run.has_test) {
      ++test_count;
      sum_ta += seed_run.test_accuracy;
      sum_tf += seed_run.test_fairness;
    }
  }
  if (ok_count > 0) {
    summary.mean_validation_accuracy = sum_va / static_cast<double>(ok_count);
    summary.mean_validation_fairness = sum_vf / static_cast<double>(ok_count);
  }
  summary.has_test = test_count > 0 && test_count == ok_count;
  if (summary.has_test) {
    summary.mean_test_accuracy = sum_ta / static_cast<double>(test_count);
    summary.mean_test_fairness = sum_tf / static_cast<double>(test_count);
  }

  if (!config.baseline_summary.empty()) {
    const RunSummary baseline = read_summary(config.baseline_summary);
    summary.baseline_name = baseline.run_name;
    std::vector<std::string> metrics = {"validation_accuracy", "validation_fairness"};
    if (summary.has_test && baseline.has_test) {
      metrics.emplace_back("test_accuracy");
      metrics.emplace_back("test_fairness");
    }
    for (const std::string& metric : metrics) {
      const KsResult ks = compare_runs(summary, baseline, metric);
      summary.baseline_comparisons.push_back({metric, ks.d, ks.p_value});
    }
  }

  write_summary((fs::path(output_dir) / "summary.json").string(), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// Analytics
// ---------------------------------------------------------------------------

namespace {

std::vector<double> metric_samples(const RunSummary& summary, const std::string& metric) {
  std::vector<double> values;
  for (const SeedRun& seed : summary.seeds) {
    if (!seed.ok) continue;
    if (metric == "validation_accuracy") values.push_back(seed.validation_accuracy);
    else if (metric == "validation_fairness") values.push_back(seed.validation_fairness);
    else if (metric == "test_accuracy" || metric == "test_fairness") {
      if (!seed.has_test)
        throw HarnessError("metric '" + metric + "' absent: run has no test evaluations");
      values.push_back(metric == "test_accuracy" ? seed.test_accuracy : seed.test_fairness);
    } else {
      throw HarnessError("unknown comparison metric '" + metric + "'");
    }
  }
  return values;
}

}  // namespace

KsResult compare_runs(const RunSummary& a, const RunSummary& b, const std::string& metric) {
  const std::vector<double> sample_a = metric_samples(a, metric);
  const std::vector<double> sample_b = metric_samples(b, metric);
  if (sample_a.size() < 2 || sample_b.size() < 2)
    throw HarnessError("compare_runs needs at least two successful seeds per run");
  return ks_test(sample_a, sample_b);
}

std::vector<RungDensityCell> rung_pareto_density(const std::vector<TrialRecord>& trials) {
  bool any_bandit = false;
  for (const TrialRecord& trial : trials)
    if (trial.bracket >= 0) any_bandit = true;
  if (!any_bandit) throw HarnessError("rung_pareto_density requires a bandit (hyperband) log");

  std::vector<TradeoffPoint> points;
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].failed) continue;
    points.push_back({trials[i].accuracy, trials[i].fairness});
    source.push_back(i);
  }
  std::set<std::size_t> frontier;
  if (!points.empty())
    for (std::size_t idx : pareto_frontier(points)) frontier.insert(source[idx]);

  std::map<std::pair<int, int>, RungDensityCell> cells;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& trial = trials[i];
    if (trial.failed || trial.bracket < 0) continue;
    RungDensityCell& cell = cells[{-trial.bracket, trial.rung}];
    cell.bracket = trial.bracket;
    cell.rung = trial.rung;
    ++cell.trials;
    if (frontier.count(i) != 0) ++cell.on_frontier;
  }
  std::vector<RungDensityCell> out;
  for (auto& [key, cell] : cells) {
    (void)key;
    cell.density = cell.trials == 0
                       ? 0.0
                       : static_cast<double>(cell.on_frontier) / static_cast<double>(cell.trials);
    out.push_back(cell);
  }
  return out;
}

SelectionIndex selection_index(const RunSummary& summary) {
  SelectionIndex index;
  for (const SeedRun& seed : summary.seeds)
    if (seed.ok) index[{summary.run_name, seed.seed}] = seed.selected_trial;
  return index;
}

void emit_plot_data(const std::vector<TrialLog>& logs, PlotKind kind, std::ostream& out,
                    const SelectionIndex& selected) {
  if (logs.empty()) throw HarnessError("emit_plot_data: no trial logs given");

  if (kind == PlotKind::Heatmap) {
    out << "run,seed,bracket,rung,trials,on_frontier,density\n";
    for (const TrialLog& log : logs) {
      for (const RungDensityCell& cell : rung_pareto_density(log.trials)) {
        out << log.run << ',' << log.run_seed << ',' << cell.bracket << ',' << cell.rung << ','
            << cell.trials << ',' << cell.on_frontier << ',' << format_double(cell.density)
            << '\n';
      }
    }
    return;
  }

  struct Row {
    const TrialLog* log;
    std::size_t index;
  };
  std::vector<Row> rows;
  if (kind == PlotKind::Scatter) {
    for (const TrialLog& log : logs)
      for (std::size_t i = 0; i < log.trials.size(); ++i) rows.push_back({&log, i});
  } else {  // global frontier over all successful trials
    std::vector<TradeoffPoint> points;
    std::vector<Row> source;
    for (const TrialLog& log : logs) {
      for (std::size_t i = 0; i < log.trials.size(); ++i) {
        if (log.trials[i].failed) continue;
        points.push_back({log.trials[i].accuracy, log.trials[i].fairness});
        source.push_back({&log, i});
      }
    }
    if (points.empty()) throw HarnessError("emit_plot_data: no successful trials");
    for (std::size_t idx : pareto_frontier(points)) rows.push_back(source[idx]);
  }

  out << "run,seed,trial,config,bracket,rung,budget,accuracy,fairness,alpha_used,goal,selected\n";
  for (const Row& row : rows) {
    const TrialRecord& trial = row.log->trials[row.index];
    const auto sel = selected.find({row.log->run, row.log->run_seed});
    const bool is_selected = sel != selected.end() && sel->second == row.index;
    out << row.log->run << ',' << row.log->run_seed << ',' << row.index << ',' << trial.config.id
        << ',' << trial.bracket << ',' << trial.rung << ',' << format_double(trial.budget_units)
        << ',';
    if (trial.failed) out << ",,";
    else out << format_double(trial.accuracy) << ',' << format_double(trial.fairness) << ',';
    out << format_double(trial.alpha_used) << ',';
    if (trial.failed) out << ',';
    else out << format_double(trial.goal) << ',';
    out << (is_selected ? 1 : 0) << '\n';
  }
}

std::vector<std::string> verify_summary_replay(const RunSummary& summary,
                                               const std::vector<TrialLog>& logs,
                                               const AlphaPolicy& policy) {
  std::vector<std::string> problems;
  for (const SeedRun& seed : summary.seeds) {
    if (!seed.ok) continue;
    const TrialLog* log = nullptr;
    for (const TrialLog& candidate : logs)
      if (candidate.run_seed == seed.seed && candidate.run == summary.run_name) log = &candidate;
    if (log == nullptr) {
      problems.push_back("seed " + std::to_string(seed.seed) + ": no trial log");
      continue;
    }

    const Selection replayed = select_model(log->trials, policy);
    if (replayed.config.id != seed.selected.id)
      problems.push_back("seed " + std::to_string(seed.seed) + ": selection mismatch (replayed " +
                         std::to_string(replayed.config.id) + ", stored " +
                         std::to_string(seed.selected.id) + ")");
    if (replayed.trial_index != seed.selected_trial)
      problems.push_back("seed " + std::to_string(seed.seed) + ": selected trial index mismatch");
    if (replayed.alpha != seed.selection_alpha)
      problems.push_back("seed " + std::to_string(seed.seed) + ": selection alpha mismatch");

    std::int64_t consumed = 0;
    bool scale_ok = true;
    for (const TrialRecord& trial : log->trials) {
      const double scaled = trial.budget_units * static_cast<double>(seed.budget_scale);
      const auto rounded = static_cast<std::int64_t>(std::llround(scaled));
      if (std::abs(scaled - static_cast<double>(rounded)) > 1e-6) scale_ok = false;
      consumed += rounded;
    }
    if (!scale_ok)
      problems.push_back("seed " + std::to_string(seed.seed) +
                         ": logged budgets are not multiples of 1/budget_scale");
    else if (consumed != seed.consumed_scaled)
      problems.push_back("seed " + std::to_string(seed.seed) + ": consumed budget mismatch");

    for (std::size_t i = 0; i < log->trials.size(); ++i) {
      const TrialRecord& trial = log->trials[i];
      if (trial.failed) continue;
      const double expected = scalarize({trial.accuracy, trial.fairness}, trial.alpha_used);
      if (std::abs(expected - trial.goal) > 1e-12) {
        problems.push_back("seed " + std::to_string(seed.seed) + " trial " + std::to_string(i) +
                           ": goal does not match scalarize(accuracy, fairness, alpha)");
        break;
      }
    }
  }
  return problems;
}

}  // namespace fairhpo
