#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairhpo/evaluators.hpp"
#include "fairhpo/fairmetrics.hpp"
#include "fairhpo/searchspace.hpp"

namespace fairhpo {

// One budget unit is 1% of the training data, so unit budgets map to
// training-slice fractions through this constant.
constexpr double kBudgetUnitsPerFullData = 100.0;

// One evaluated (configuration, budget) pair. `wall_time_s` stays in memory
// only; trial logs must be byte-identical across reruns and wall time is not.
struct TrialRecord {
  Configuration config;
  double budget_units = 0.0;
  double accuracy = 0.0;
  double fairness = 0.0;
  double alpha_used = 0.0;
  double goal = 0.0;  // NaN for failed trials; they rank below everything
  int bracket = -1;   // -1 for non-bandit tuners
  int rung = -1;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;
};

struct AlphaPolicy {
  enum class Mode { Static, Auto };
  Mode mode = Mode::Static;
  double value = 0.5;

  static AlphaPolicy fixed(double alpha);
  static AlphaPolicy automatic() { return {Mode::Auto, 0.0}; }
};

// Hyperband bracket schedule. Budgets are exact rationals with denominator
// eta^s_max; `budget_scaled` is the numerator, so budget sums can be compared
// exactly instead of through floating-point accumulation.
struct RungSpec {
  int index = 0;
  std::int64_t n = 0;              // survivors entering the rung
  double budget_units = 0.0;       // r * eta^index, real-valued
  std::int64_t budget_scaled = 0;  // budget_units * eta^s_max, exact
  std::int64_t keep = 0;           // floor(n / eta); 0 on a final rung means evaluation-only
};

struct BracketSpec {
  int s = 0;
  std::int64_t n = 0;      // ceil((s_max+1)/(s+1) * eta^s)
  double r_units = 0.0;    // R * eta^-s
  std::vector<RungSpec> rungs;
};

struct BracketSchedule {
  std::int64_t max_budget = 0;  // R
  std::int64_t eta = 0;
  int s_max = 0;
  std::int64_t scale = 1;  // eta^s_max
  std::vector<BracketSpec> brackets;  // s_max down to 0
  std::int64_t total_scaled = 0;      // sum over rungs of n_i * budget_scaled_i

  double total_units() const { return static_cast<double>(total_scaled) / static_cast<double>(scale); }
};

BracketSchedule bracket_schedule(std::int64_t max_budget, std::int64_t eta);

struct TunerResult {
  std::vector<TrialRecord> trials;
  std::int64_t consumed_scaled = 0;  // exact, in units of 1/budget_scale
  std::int64_t budget_scale = 1;

  double consumed_units() const {
    return static_cast<double>(consumed_scaled) / static_cast<double>(budget_scale);
  }
};

// Random search: floor(total_budget / max_budget) configurations, each
// evaluated at full budget. alpha = 1 is fairness-blind RS; FairRS defaults
// to alpha = 0.5. Evaluator failures propagate with the trial's
// configuration attached.
TunerResult run_random_search(const SearchSpace& space, const Evaluator& evaluator,
                              std::int64_t total_budget, std::int64_t max_budget, double alpha,
                              std::uint64_t master_seed, const MetricSpec& metrics = {},
                              int workers = 1);

struct TpeOptions {
  double gamma = 0.25;     // quantile of goals labelled "good"
  int n_candidates = 24;   // draws from the good density per suggestion
  int warmup = 10;         // uniform trials before the model kicks in
};

// Splits history at the gamma-quantile of the goal, fits per-dimension
// Parzen densities over the good and bad halves (respecting the conditional
// tree) and returns the candidate maximizing the good/bad density ratio.
// Degenerate histories fall back to uniform sampling.
Configuration tpe_suggest(const std::vector<TrialRecord>& history, const SearchSpace& space,
                          const TpeOptions& options, Rng& rng);

// Sequential TPE at full budget. Only static alpha policies are accepted:
// the dynamic heuristic would keep moving the optimization target under the
// density model.
TunerResult run_tpe(const SearchSpace& space, const Evaluator& evaluator,
                    std::int64_t total_budget, std::int64_t max_budget,
                    const AlphaPolicy& alpha_policy, std::uint64_t master_seed,
                    const MetricSpec& metrics = {}, const TpeOptions& options = {});

// Hyperband outer loop over brackets s_max..0 with successive halving inside.
// With an auto policy each rung recomputes alpha from the rung's mean
// fairness and accuracy before ranking; static alpha = 1 is fairness-blind
// HB. Evaluator failures become failed trials that rank last but stay in the
// log. Rung evaluations run on `workers` threads; results are merged in
// configuration order so logs are independent of scheduling.
//
// Sampling streams (for oracle replication in tests): the j-th configuration
// sampled over the whole run draws from derive_stream(master_seed,
// "fairband-sample", j); the k-th evaluation in canonical order (brackets
// s_max..0, rungs ascending, configurations in sampling order) is seeded
// with derive_stream(master_seed, "trial", k).
TunerResult run_fairband(const SearchSpace& space, const Evaluator& evaluator,
                         std::int64_t max_budget, std::int64_t eta,
                         const AlphaPolicy& alpha_policy, std::uint64_t master_seed,
                         const MetricSpec& metrics = {}, int workers = 1);

struct Selection {
  Configuration config;
  double alpha = 0.5;        // selection alpha actually used
  std::size_t trial_index = 0;
  double accuracy = 0.0;
  double fairness = 0.0;
  double goal = 0.0;
  double budget_units = 0.0;
};

// Final model selection: argmax of the scalarized goal. Static policies
// reuse the search alpha; the auto policy recomputes a selection alpha from
// the mean fairness/accuracy over all successful trials. Ties break toward
// larger budget, then smaller configuration id.
Selection select_model(const std::vector<TrialRecord>& trials, const AlphaPolicy& policy);

}  // namespace fairhpo
