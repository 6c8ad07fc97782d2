#include "fairhpo/tuners.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "fairhpo/errors.hpp"

namespace fairhpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        body(i);
      }
    });
  }
  for (auto& thread : threads) thread.join();
}

double ranking_goal(const TrialRecord& trial) { return trial.failed ? -kInf : trial.goal; }

// Ranking order inside a rung and for final selection: goal desc, budget
// desc, configuration id asc.
bool ranks_before(const TrialRecord& lhs, const TrialRecord& rhs) {
  const double lg = ranking_goal(lhs), rg = ranking_goal(rhs);
  if (lg != rg) return lg > rg;
  if (lhs.budget_units != rhs.budget_units) return lhs.budget_units > rhs.budget_units;
  return lhs.config.id < rhs.config.id;
}

std::string describe_config(const Configuration& config) {
  std::ostringstream os;
  os << "config " << config.id << " {";
  bool first = true;
  for (const auto& [name, value] : config.assignments) {
    if (!first) os << ", ";
    first = false;
    os << name << "=" << param_value_to_string(value);
  }
  os << "}";
  return os.str();
}

double budget_fraction_for(std::int64_t max_budget) {
  const double fraction = static_cast<double>(max_budget) / kBudgetUnitsPerFullData;
  if (fraction > 1.0 + 1e-12)
    throw ConfigError("max budget " + std::to_string(max_budget) +
                      " exceeds 100 units (100% of the training data)");
  return std::min(fraction, 1.0);
}

}  // namespace

AlphaPolicy AlphaPolicy::fixed(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
  return {Mode::Static, alpha};
}

// ---------------------------------------------------------------------------
// Bracket schedule
// ---------------------------------------------------------------------------

BracketSchedule bracket_schedule(std::int64_t max_budget, std::int64_t eta) {
  if (max_budget < 1) throw ConfigError("max budget R must be >= 1");
  if (eta < 2) throw ConfigError("eta must be >= 2");

  BracketSchedule schedule;
  schedule.max_budget = max_budget;
  schedule.eta = eta;

  // s_max = floor(log_eta(R)) via integer powers.
  int s_max = 0;
  std::int64_t power = 1;  // eta^(s_max)
  while (power <= max_budget / eta) {
    power *= eta;
    ++s_max;
  }
  schedule.s_max = s_max;
  schedule.scale = power;  // eta^s_max

  for (int s = s_max; s >= 0; --s) {
    BracketSpec bracket;
    bracket.s = s;
    std::int64_t eta_s = 1;
    for (int i = 0; i < s; ++i) eta_s *= eta;
    // n = ceil((s_max + 1) / (s + 1) * eta^s), exactly in integers.
    const std::int64_t numerator = static_cast<std::int64_t>(s_max + 1) * eta_s;
    bracket.n = (numerator + s) / (s + 1);
    bracket.r_units = static_cast<double>(max_budget) / static_cast<double>(eta_s);

    std::int64_t eta_i = 1;
    for (int i = 0; i <= s; ++i) {
      RungSpec rung;
      rung.index = i;
      rung.n = bracket.n / eta_i;
      // budget_scaled = R * eta^(s_max - s + i); dividing by eta^s is exact.
      rung.budget_scaled = max_budget * (schedule.scale / eta_s) * eta_i;
      rung.budget_units = static_cast<double>(rung.budget_scaled) / static_cast<double>(schedule.scale);
      rung.keep = rung.n / eta;
      schedule.total_scaled += rung.n * rung.budget_scaled;
      bracket.rungs.push_back(rung);
      eta_i *= eta;
    }
    schedule.brackets.push_back(std::move(bracket));
  }
  return schedule;
}

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

TunerResult run_random_search(const SearchSpace& space, const Evaluator& evaluator,
                              std::int64_t total_budget, std::int64_t max_budget, double alpha,
                              std::uint64_t master_seed, const MetricSpec& metrics, int workers) {
  if (total_budget < max_budget)
    throw ConfigError("total budget must be at least one full-budget trial");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
  const std::int64_t n_trials = total_budget / max_budget;
  const double fraction = budget_fraction_for(max_budget);

  TunerResult result;
  result.trials.resize(static_cast<std::size_t>(n_trials));
  std::vector<std::string> failures(static_cast<std::size_t>(n_trials));

  parallel_for(static_cast<std::size_t>(n_trials), workers, [&](std::size_t t) {
    Rng rng(derive_stream(master_seed, "rs-sample", t));
    TrialRecord& trial = result.trials[t];
    trial.config = sample_configuration(space, rng);
    trial.config.id = static_cast<std::int64_t>(t);
    trial.budget_units = static_cast<double>(max_budget);
    trial.seed = derive_stream(master_seed, "trial", t);
    trial.alpha_used = alpha;

    EvaluationRequest request{trial.config, fraction, trial.seed, metrics};
    const EvalOutcome outcome = evaluator.evaluate(request);
    if (!outcome.ok) {
      failures[t] = outcome.error;
      return;
    }
    trial.accuracy = outcome.result.accuracy;
    trial.fairness = outcome.result.fairness;
    trial.goal = scalarize({trial.accuracy, trial.fairness}, alpha);
    trial.wall_time_s = outcome.result.wall_time_s;
  });

  for (std::size_t t = 0; t < failures.size(); ++t)
    if (!failures[t].empty())
      throw TunerError("evaluation failed for " + describe_config(result.trials[t].config) + ": " +
                       failures[t]);

  result.consumed_scaled = n_trials * max_budget;
  result.budget_scale = 1;
  return result;
}

// ---------------------------------------------------------------------------
// TPE
// ---------------------------------------------------------------------------

namespace {

// Normalized [0,1] coordinate of a numeric value on the parameter's scale.
double to_unit(const ParamSpec& spec, const ParamValue& value) {
  switch (spec.kind) {
    case ParamKind::ContinuousUniform:
      return (std::get<double>(value) - spec.low) / (spec.high - spec.low);
    case ParamKind::ContinuousLogUniform:
      return (std::log(std::get<double>(value)) - std::log(spec.low)) /
             (std::log(spec.high) - std::log(spec.low));
    case ParamKind::IntegerUniform:
      if (spec.ihigh == spec.ilow) return 0.5;
      return static_cast<double>(std::get<std::int64_t>(value) - spec.ilow) /
             static_cast<double>(spec.ihigh - spec.ilow);
    case ParamKind::Categorical:
      return 0.0;
  }
  return 0.0;
}

ParamValue from_unit(const ParamSpec& spec, double u) {
  u = std::clamp(u, 0.0, 1.0);
  switch (spec.kind) {
    case ParamKind::ContinuousUniform:
      return spec.low + u * (spec.high - spec.low);
    case ParamKind::ContinuousLogUniform: {
      const double v = std::exp(std::log(spec.low) + u * (std::log(spec.high) - std::log(spec.low)));
      return std::clamp(v, spec.low, spec.high);
    }
    case ParamKind::IntegerUniform: {
      const auto v = spec.ilow + static_cast<std::int64_t>(
                                     std::llround(u * static_cast<double>(spec.ihigh - spec.ilow)));
      return std::clamp(v, spec.ilow, spec.ihigh);
    }
    case ParamKind::Categorical:
      return spec.categories.front();
  }
  return 0.0;
}

// 1-D Parzen window over normalized coordinates. Bandwidth per center:
// max(range/10, distance to nearest neighbor) with range = 1.
struct ParzenDim {
  std::vector<double> centers;
  std::vector<double> bandwidths;

  static ParzenDim fit(std::vector<double> observations) {
    ParzenDim dim;
    dim.centers = std::move(observations);
    dim.bandwidths.assign(dim.centers.size(), 0.1);
    if (dim.centers.size() < 2) return dim;
    std::vector<double> sorted = dim.centers;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < dim.centers.size(); ++j) {
      const double c = dim.centers[j];
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), c);
      double nn = kInf;
      if (it != sorted.begin()) nn = std::min(nn, c - *(it - 1));
      // skip duplicates of c itself when measuring the neighbor gap
      auto above = std::upper_bound(sorted.begin(), sorted.end(), c);
      if (above != sorted.end()) nn = std::min(nn, *above - c);
      if (it != sorted.begin() && *(it - 1) == c) nn = 0.0;
      dim.bandwidths[j] = std::max(0.1, std::isfinite(nn) ? nn : 0.1);
    }
    return dim;
  }

  double density(double u) const {
    if (centers.empty()) return 1.0;  // uniform over the unit interval
    double sum = 0.0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double d = (u - centers[j]) / bandwidths[j];
      sum += std::exp(-0.5 * d * d) / (bandwidths[j] * 2.5066282746310002);
    }
    return sum / static_cast<double>(centers.size());
  }

  double sample(Rng& rng) const {
    if (centers.empty()) return rng.uniform01();
    const std::size_t j = static_cast<std::size_t>(rng.bounded(centers.size()));
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double u = centers[j] + bandwidths[j] * rng.normal01();
      if (u >= 0.0 && u <= 1.0) return u;
    }
    return std::clamp(centers[j], 0.0, 1.0);
  }
};

// Laplace-smoothed categorical density (prior weight 1 per category).
struct CategoricalDensity {
  std::vector<std::string> categories;
  std::vector<double> weights;  // count + 1
  double total = 0.0;

  static CategoricalDensity fit(const ParamSpec& spec,
                                const std::vector<std::string>& observations) {
    CategoricalDensity d;
    d.categories = spec.categories;
    d.weights.assign(spec.categories.size(), 1.0);
    for (const auto& obs : observations) {
      for (std::size_t c = 0; c < d.categories.size(); ++c)
        if (d.categories[c] == obs) {
          d.weights[c] += 1.0;
          break;
        }
    }
    for (double w : d.weights) d.total += w;
    return d;
  }

  double density(const std::string& value) const {
    for (std::size_t c = 0; c < categories.size(); ++c)
      if (categories[c] == value) return weights[c] / total;
    return 1.0 / total;
  }

  const std::string& sample(Rng& rng) const {
    double r = rng.uniform01() * total;
    for (std::size_t c = 0; c < categories.size(); ++c) {
      if (r < weights[c]) return categories[c];
      r -= weights[c];
    }
    return categories.back();
  }
};

struct TpeModel {
  std::map<std::string, ParzenDim> numeric_good, numeric_bad;
  std::map<std::string, CategoricalDensity> categorical_good, categorical_bad;

  void fit_param(const ParamSpec& spec, const std::vector<const Configuration*>& good,
                 const std::vector<const Configuration*>& bad) {
    if (spec.kind == ParamKind::Categorical) {
      std::vector<std::string> good_obs, bad_obs;
      for (const Configuration* c : good)
        if (const ParamValue* v = c->find(spec.name)) good_obs.push_back(std::get<std::string>(*v));
      for (const Configuration* c : bad)
        if (const ParamValue* v = c->find(spec.name)) bad_obs.push_back(std::get<std::string>(*v));
      categorical_good.emplace(spec.name, CategoricalDensity::fit(spec, good_obs));
      categorical_bad.emplace(spec.name, CategoricalDensity::fit(spec, bad_obs));
      return;
    }
    std::vector<double> good_obs, bad_obs;
    for (const Configuration* c : good)
      if (const ParamValue* v = c->find(spec.name)) good_obs.push_back(to_unit(spec, *v));
    for (const Configuration* c : bad)
      if (const ParamValue* v = c->find(spec.name)) bad_obs.push_back(to_unit(spec, *v));
    numeric_good.emplace(spec.name, ParzenDim::fit(std::move(good_obs)));
    numeric_bad.emplace(spec.name, ParzenDim::fit(std::move(bad_obs)));
  }

  // Draws one value from the good density and accumulates log(l/g).
  ParamValue draw(const ParamSpec& spec, Rng& rng, double* log_ratio) const {
    if (spec.kind == ParamKind::Categorical) {
      const auto& lg = categorical_good.at(spec.name);
      const auto& bg = categorical_bad.at(spec.name);
      const std::string& value = lg.sample(rng);
      *log_ratio += std::log(lg.density(value)) - std::log(bg.density(value));
      return value;
    }
    const auto& lg = numeric_good.at(spec.name);
    const auto& bg = numeric_bad.at(spec.name);
    const double u = lg.sample(rng);
    *log_ratio += std::log(std::max(lg.density(u), 1e-300)) -
                  std::log(std::max(bg.density(u), 1e-300));
    return from_unit(spec, u);
  }
};

}  // namespace

Configuration tpe_suggest(const std::vector<TrialRecord>& history, const SearchSpace& space,
                          const TpeOptions& options, Rng& rng) {
  if (history.empty()) return sample_configuration(space, rng);

  std::vector<std::size_t> order(history.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    const double lg = ranking_goal(history[lhs]), rg = ranking_goal(history[rhs]);
    if (lg != rg) return lg > rg;
    return lhs < rhs;
  });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(options.gamma * static_cast<double>(history.size()) - 1e-12)));

  std::vector<const Configuration*> good, bad;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_good ? good : bad).push_back(&history[order[i]].config);

  TpeModel model;
  model.fit_param(space.selector, good, bad);
  for (const auto& p : space.root_params) model.fit_param(p, good, bad);
  for (const auto& [category, params] : space.conditional_subspaces) {
    (void)category;
    for (const auto& p : params) model.fit_param(p, good, bad);
  }

  Configuration best;
  double best_score = -kInf;
  for (int c = 0; c < options.n_candidates; ++c) {
    Configuration candidate;
    double log_ratio = 0.0;
    for (const auto& p : space.root_params)
      candidate.assignments[p.name] = model.draw(p, rng, &log_ratio);
    const ParamValue selector_value = model.draw(space.selector, rng, &log_ratio);
    candidate.assignments[space.selector.name] = selector_value;
    for (const auto& p : space.branch(std::get<std::string>(selector_value)))
      candidate.assignments[p.name] = model.draw(p, rng, &log_ratio);
    if (log_ratio > best_score) {
      best_score = log_ratio;
      best = std::move(candidate);
    }
  }
  return best;
}

TunerResult run_tpe(const SearchSpace& space, const Evaluator& evaluator,
                    std::int64_t total_budget, std::int64_t max_budget,
                    const AlphaPolicy& alpha_policy, std::uint64_t master_seed,
                    const MetricSpec& metrics, const TpeOptions& options) {
  if (alpha_policy.mode != AlphaPolicy::Mode::Static)
    throw ConfigError("TPE requires a static alpha; the dynamic heuristic destabilizes the "
                      "density model's objective");
  if (total_budget < max_budget)
    throw ConfigError("total budget must be at least one full-budget trial");
  const double alpha = alpha_policy.value;
  const std::int64_t n_trials = total_budget / max_budget;
  const double fraction = budget_fraction_for(max_budget);

  TunerResult result;
  for (std::int64_t t = 0; t < n_trials; ++t) {
    Rng rng(derive_stream(master_seed, "tpe-suggest", static_cast<std::uint64_t>(t)));
    TrialRecord trial;
    trial.config = result.trials.size() < static_cast<std::size_t>(options.warmup)
                       ? sample_configuration(space, rng)
                       : tpe_suggest(result.trials, space, options, rng);
    trial.config.id = t;
    trial.budget_units = static_cast<double>(max_budget);
    trial.seed = derive_stream(master_seed, "trial", static_cast<std::uint64_t>(t));
    trial.alpha_used = alpha;

    EvaluationRequest request{trial.config, fraction, trial.seed, metrics};
    const EvalOutcome outcome = evaluator.evaluate(request);
    if (!outcome.ok)
      throw TunerError("evaluation failed for " + describe_config(trial.config) + ": " +
                       outcome.error);
    trial.accuracy = outcome.result.accuracy;
    trial.fairness = outcome.result.fairness;
    trial.goal = scalarize({trial.accuracy, trial.fairness}, alpha);
    trial.wall_time_s = outcome.result.wall_time_s;
    result.trials.push_back(std::move(trial));
  }
  result.consumed_scaled = n_trials * max_budget;
  result.budget_scale = 1;
  return result;
}

// ---------------------------------------------------------------------------
// Fairband
// ---------------------------------------------------------------------------

TunerResult run_fairband(const SearchSpace& space, const Evaluator& evaluator,
                         std::int64_t max_budget, std::int64_t eta,
                         const AlphaPolicy& alpha_policy, std::uint64_t master_seed,
                         const MetricSpec& metrics, int workers) {
  const BracketSchedule schedule = bracket_schedule(max_budget, eta);

  TunerResult result;
  result.budget_scale = schedule.scale;

  std::int64_t next_config_id = 0;
  std::uint64_t sample_slot = 0;
  std::uint64_t eval_counter = 0;

  for (const BracketSpec& bracket : schedule.brackets) {
    std::vector<Configuration> survivors;
    survivors.reserve(static_cast<std::size_t>(bracket.n));
    for (std::int64_t j = 0; j < bracket.n; ++j) {
      Rng rng(derive_stream(master_seed, "fairband-sample", sample_slot++));
      Configuration config = sample_configuration(space, rng);
      config.id = next_config_id++;
      survivors.push_back(std::move(config));
    }

    for (const RungSpec& rung : bracket.rungs) {
      if (static_cast<std::int64_t>(survivors.size()) != rung.n)
        throw TunerError("schedule mismatch: expected " + std::to_string(rung.n) +
                         " survivors, have " + std::to_string(survivors.size()));
      const double fraction = rung.budget_units / kBudgetUnitsPerFullData;
      if (fraction > 1.0 + 1e-12)
        throw ConfigError("rung budget exceeds the full training data");

      std::vector<TrialRecord> rung_trials(survivors.size());
      const std::uint64_t eval_base = eval_counter;
      eval_counter += survivors.size();
      parallel_for(survivors.size(), workers, [&](std::size_t i) {
        TrialRecord& trial = rung_trials[i];
        trial.config = survivors[i];
        trial.budget_units = rung.budget_units;
        trial.bracket = bracket.s;
        trial.rung = rung.index;
        trial.seed = derive_stream(master_seed, "trial", eval_base + i);

        EvaluationRequest request{trial.config, std::min(fraction, 1.0), trial.seed, metrics};
        const EvalOutcome outcome = evaluator.evaluate(request);
        if (!outcome.ok) {
          trial.failed = true;
          trial.error = outcome.error;
          trial.goal = std::numeric_limits<double>::quiet_NaN();
          return;
        }
        trial.accuracy = outcome.result.accuracy;
        trial.fairness = outcome.result.fairness;
        trial.wall_time_s = outcome.result.wall_time_s;
      });
      result.consumed_scaled += rung.n * rung.budget_scaled;

      double alpha = alpha_policy.value;
      if (alpha_policy.mode == AlphaPolicy::Mode::Auto) {
        double sum_a = 0.0, sum_f = 0.0;
        std::size_t successes = 0;
        for (const TrialRecord& trial : rung_trials) {
          if (trial.failed) continue;
          sum_a += trial.accuracy;
          sum_f += trial.fairness;
          ++successes;
        }
        alpha = successes == 0
                    ? 0.5
                    : dynamic_alpha(sum_f / static_cast<double>(successes),
                                    sum_a / static_cast<double>(successes));
      }
      for (TrialRecord& trial : rung_trials) {
        trial.alpha_used = alpha;
        if (!trial.failed) trial.goal = scalarize({trial.accuracy, trial.fairness}, alpha);
      }

      const bool final_rung = rung.index == bracket.s;
      if (!final_rung) {
        std::vector<std::size_t> order(rung_trials.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
          return ranks_before(rung_trials[lhs], rung_trials[rhs]);
        });
        order.resize(static_cast<std::size_t>(rung.keep));
        std::sort(order.begin(), order.end());  // keep configuration order stable
        std::vector<Configuration> kept;
        kept.reserve(order.size());
        for (std::size_t i : order) kept.push_back(survivors[i]);
        survivors = std::move(kept);
      }

      for (TrialRecord& trial : rung_trials) result.trials.push_back(std::move(trial));
    }
  }
  return result;
}

Selection select_model(const std::vector<TrialRecord>& trials, const AlphaPolicy& policy) {
  double sum_a = 0.0, sum_f = 0.0;
  std::size_t successes = 0;
  for (const TrialRecord& trial : trials) {
    if (trial.failed) continue;
    sum_a += trial.accuracy;
    sum_f += trial.fairness;
    ++successes;
  }
  if (successes == 0) throw TunerError("select_model: no successful trials");

  const double alpha = policy.mode == AlphaPolicy::Mode::Auto
                           ? dynamic_alpha(sum_f / static_cast<double>(successes),
                                           sum_a / static_cast<double>(successes))
                           : policy.value;

  const TrialRecord* best = nullptr;
  std::size_t best_index = 0;
  double best_goal = 0.0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& trial = trials[i];
    if (trial.failed) continue;
    const double goal = scalarize({trial.accuracy, trial.fairness}, alpha);
    bool better = best == nullptr;
    if (!better) {
      if (goal != best_goal) better = goal > best_goal;
      else if (trial.budget_units != best->budget_units)
        better = trial.budget_units > best->budget_units;
      else better = trial.config.id < best->config.id;
    }
    if (better) {
      best = &trial;
      best_index = i;
      best_goal = goal;
    }
  }

  Selection selection;
  selection.config = best->config;
  selection.alpha = alpha;
  selection.trial_index = best_index;
  selection.accuracy = best->accuracy;
  selection.fairness = best->fairness;
  selection.goal = scalarize({best->accuracy, best->fairness}, alpha);
  selection.budget_units = best->budget_units;
  return selection;
}

}  // namespace fairhpo
