#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "fairhpo/errors.hpp"
#include "fairhpo/tuners.hpp"

using namespace fairhpo;

namespace {

struct FnEvaluator : Evaluator {
  std::function<EvalOutcome(const EvaluationRequest&)> fn;
  explicit FnEvaluator(std::function<EvalOutcome(const EvaluationRequest&)> f) : fn(std::move(f)) {}
  EvalOutcome evaluate(const EvaluationRequest& request) const override { return fn(request); }
};

SearchSpace demo_space() {
  SearchSpace space;
  space.root_params.push_back(ParamSpec::continuous("x", 0.0, 1.0));
  space.selector = ParamSpec::categorical("model", {"a", "b"});
  space.conditional_subspaces["a"] = {ParamSpec::continuous("u", 0.0, 1.0)};
  space.conditional_subspaces["b"] = {ParamSpec::log_continuous("v", 1e-3, 1.0)};
  validate_space(space);
  return space;
}

// Deterministic trade-off surface driven by the root parameter x.
EvalOutcome deterministic_surface(const EvaluationRequest& request) {
  const double x = request.config.number("x");
  EvaluationResult result;
  result.accuracy = 0.2 + 0.6 * x;
  result.fairness = 0.8 - 0.5 * x;
  return EvalOutcome::success(result);
}

}  // namespace

TEST_SUITE_BEGIN("tuners");

// ---------------------------------------------------------------------------
// bracket schedule
// ---------------------------------------------------------------------------

TEST_CASE("published bracket table for R=100, eta=3") {
  const BracketSchedule schedule = bracket_schedule(100, 3);
  CHECK(schedule.s_max == 4);
  CHECK(schedule.scale == 81);
  REQUIRE(schedule.brackets.size() == 5);

  const std::vector<std::vector<std::int64_t>> expected_n{
      {81, 27, 9, 3, 1}, {34, 11, 3, 1}, {15, 5, 1}, {8, 2}, {5}};
  const std::vector<std::vector<double>> expected_r{
      {1.23, 3.70, 11.1, 33.3, 100.0},
      {3.70, 11.1, 33.3, 100.0},
      {11.1, 33.3, 100.0},
      {33.3, 100.0},
      {100.0}};
  for (std::size_t b = 0; b < 5; ++b) {
    const BracketSpec& bracket = schedule.brackets[b];
    CHECK(bracket.s == 4 - static_cast<int>(b));
    REQUIRE(bracket.rungs.size() == expected_n[b].size());
    for (std::size_t i = 0; i < bracket.rungs.size(); ++i) {
      CHECK(bracket.rungs[i].n == expected_n[b][i]);
      CHECK(std::abs(bracket.rungs[i].budget_units - expected_r[b][i]) <= 0.05);
    }
  }
  // analytic total: sum over rungs of n_i * r_i = 63400/27 units
  CHECK(schedule.total_scaled == 190200);
  CHECK(schedule.total_units() == doctest::Approx(63400.0 / 27.0));
}

TEST_CASE("degenerate schedule R=1") {
  const BracketSchedule schedule = bracket_schedule(1, 3);
  CHECK(schedule.s_max == 0);
  REQUIRE(schedule.brackets.size() == 1);
  REQUIRE(schedule.brackets[0].rungs.size() == 1);
  CHECK(schedule.brackets[0].n == 1);
  CHECK(schedule.brackets[0].rungs[0].budget_units == 1.0);
}

TEST_CASE("hand-evaluated schedule R=9, eta=3") {
  const BracketSchedule schedule = bracket_schedule(9, 3);
  CHECK(schedule.s_max == 2);
  REQUIRE(schedule.brackets.size() == 3);
  CHECK(schedule.brackets[0].n == 9);
  CHECK(schedule.brackets[1].n == 5);
  CHECK(schedule.brackets[2].n == 3);
  CHECK(schedule.brackets[0].r_units == doctest::Approx(1.0));
  CHECK(schedule.brackets[1].r_units == doctest::Approx(3.0));
  CHECK(schedule.brackets[2].r_units == doctest::Approx(9.0));
}

TEST_CASE("schedule invariants: survivors non-increasing, keep = floor(n_i/eta)") {
  for (const auto& [R, eta] : std::vector<std::pair<std::int64_t, std::int64_t>>{
           {100, 3}, {81, 3}, {64, 2}, {50, 4}, {27, 3}}) {
    const BracketSchedule schedule = bracket_schedule(R, eta);
    for (const BracketSpec& bracket : schedule.brackets) {
      for (std::size_t i = 0; i < bracket.rungs.size(); ++i) {
        const RungSpec& rung = bracket.rungs[i];
        CHECK(rung.keep == rung.n / eta);
        if (i > 0) {
          CHECK(rung.n <= bracket.rungs[i - 1].n);
          CHECK(rung.n == bracket.rungs[i - 1].keep);
        }
        CHECK(rung.budget_scaled ==
              static_cast<std::int64_t>(std::llround(rung.budget_units * schedule.scale)));
      }
      CHECK(bracket.rungs.back().budget_units == doctest::Approx(double(R)));
    }
  }
  CHECK_THROWS_AS(bracket_schedule(0, 3), ConfigError);
  CHECK_THROWS_AS(bracket_schedule(100, 1), ConfigError);
}

// ---------------------------------------------------------------------------
// random search
// ---------------------------------------------------------------------------

TEST_CASE("random search runs floor(total/R) full-budget trials") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator(deterministic_surface);
  const TunerResult result = run_random_search(space, evaluator, 2400, 100, 0.5, 1);
  CHECK(result.trials.size() == 24);
  for (const TrialRecord& trial : result.trials) {
    CHECK(trial.budget_units == 100.0);
    CHECK(trial.bracket == -1);
    CHECK(trial.rung == -1);
    CHECK(std::abs(trial.goal -
                   scalarize({trial.accuracy, trial.fairness}, trial.alpha_used)) <= 1e-12);
  }
  CHECK(result.consumed_units() == 2400.0);
  CHECK(result.consumed_units() <= 2400.0 + 100.0);

  const TunerResult single = run_random_search(space, evaluator, 100, 100, 0.5, 1);
  CHECK(single.trials.size() == 1);
  CHECK_THROWS_AS(run_random_search(space, evaluator, 99, 100, 0.5, 1), ConfigError);
}

TEST_CASE("random search is deterministic per seed, including parallel runs") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator(deterministic_surface);
  const TunerResult a = run_random_search(space, evaluator, 800, 100, 0.5, 9);
  const TunerResult b = run_random_search(space, evaluator, 800, 100, 0.5, 9);
  const TunerResult c = run_random_search(space, evaluator, 800, 100, 0.5, 9, {}, 4);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].config.assignments == b.trials[i].config.assignments);
    CHECK(a.trials[i].config.assignments == c.trials[i].config.assignments);
    CHECK(a.trials[i].goal == c.trials[i].goal);
    CHECK(a.trials[i].seed == c.trials[i].seed);
  }
  const TunerResult d = run_random_search(space, evaluator, 800, 100, 0.5, 10);
  bool any_different = false;
  for (std::size_t i = 0; i < a.trials.size(); ++i)
    if (a.trials[i].config.assignments != d.trials[i].config.assignments) any_different = true;
  CHECK(any_different);
}

TEST_CASE("evaluator failures propagate from RS with the config attached") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator([](const EvaluationRequest& request) {
    if (request.config.number("x") > 0.2) return EvalOutcome::failure("synthetic blow-up");
    return deterministic_surface(request);
  });
  CHECK_THROWS_WITH_AS(run_random_search(space, evaluator, 2000, 100, 1.0, 3),
                       doctest::Contains("x="), TunerError);
}

// ---------------------------------------------------------------------------
// TPE
// ---------------------------------------------------------------------------

TEST_CASE("empty history falls back to a uniform sample with the same stream") {
  const SearchSpace space = demo_space();
  Rng a(123), b(123);
  const Configuration suggested = tpe_suggest({}, space, {}, a);
  const Configuration sampled = sample_configuration(space, b);
  CHECK(suggested.assignments == sampled.assignments);
}

TEST_CASE("good trials concentrated on one category lift it above its prior") {
  SearchSpace space;
  space.selector = ParamSpec::categorical("model", {"lgbm-like", "other"});
  space.conditional_subspaces["lgbm-like"] = {};
  space.conditional_subspaces["other"] = {};
  validate_space(space);

  std::vector<TrialRecord> history;
  for (int i = 0; i < 20; ++i) {
    TrialRecord trial;
    trial.config.id = i;
    const bool good = i < 5;
    trial.config.assignments["model"] = std::string(good ? "lgbm-like" : "other");
    trial.accuracy = trial.fairness = good ? 0.9 : 0.1;
    trial.goal = good ? 0.9 : 0.1;
    trial.alpha_used = 0.5;
    history.push_back(std::move(trial));
  }
  // weighted-count formula: l(lgbm-like) = (5+1)/(5+2) = 6/7; the ratio
  // argmax concentrates suggestions even harder; the prior is 1/2
  int hits = 0;
  Rng rng(321);
  for (int i = 0; i < 1000; ++i)
    if (tpe_suggest(history, space, {}, rng).category("model") == "lgbm-like") ++hits;
  CHECK(hits > 500);   // above the uniform prior
  CHECK(hits > 700);   // and clearly concentrated
}

TEST_CASE("good continuous trials clustered at 0.2 pull the suggestion median there") {
  SearchSpace space;
  space.selector = ParamSpec::categorical("model", {"only"});
  space.conditional_subspaces["only"] = {ParamSpec::continuous("x", 0.0, 1.0)};
  validate_space(space);

  std::vector<TrialRecord> history;
  Rng gen(11);
  for (int i = 0; i < 40; ++i) {
    TrialRecord trial;
    trial.config.id = i;
    trial.config.assignments["model"] = std::string("only");
    const bool good = i < 10;
    trial.config.assignments["x"] = good ? 0.2 + 0.01 * gen.normal01() : gen.uniform01();
    trial.goal = good ? 0.9 : 0.1;
    trial.accuracy = trial.fairness = trial.goal;
    trial.alpha_used = 0.5;
    history.push_back(std::move(trial));
  }
  std::vector<double> suggestions;
  Rng rng(13);
  for (int i = 0; i < 1000; ++i)
    suggestions.push_back(tpe_suggest(history, space, {}, rng).number("x"));
  std::sort(suggestions.begin(), suggestions.end());
  const double median = suggestions[suggestions.size() / 2];
  CHECK(median >= 0.1);
  CHECK(median <= 0.3);
}

TEST_CASE("TPE rejects the auto alpha policy and runs with a static one") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator(deterministic_surface);
  CHECK_THROWS_AS(
      run_tpe(space, evaluator, 1000, 100, AlphaPolicy::automatic(), 1),
      ConfigError);
  const TunerResult result = run_tpe(space, evaluator, 1500, 100, AlphaPolicy::fixed(1.0), 5);
  CHECK(result.trials.size() == 15);
  CHECK(result.consumed_units() == 1500.0);
  for (const TrialRecord& trial : result.trials) CHECK(trial.alpha_used == 1.0);
  // alpha = 1 optimizes accuracy only: later trials should concentrate on
  // high-x configurations more than uniform sampling would
  double late_mean_x = 0.0;
  for (std::size_t i = 10; i < result.trials.size(); ++i)
    late_mean_x += result.trials[i].config.number("x");
  late_mean_x /= 5.0;
  CHECK(late_mean_x > 0.5);
}

// ---------------------------------------------------------------------------
// Fairband
// ---------------------------------------------------------------------------

TEST_CASE("survivor counts follow the published schedule and budget sums exactly") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator(deterministic_surface);
  const TunerResult result =
      run_fairband(space, evaluator, 100, 3, AlphaPolicy::fixed(0.5), 21);

  std::map<std::pair<int, int>, std::int64_t> rung_counts;
  for (const TrialRecord& trial : result.trials)
    ++rung_counts[{trial.bracket, trial.rung}];
  const std::vector<std::int64_t> bracket4{81, 27, 9, 3, 1};
  for (int i = 0; i < 5; ++i) CHECK(rung_counts[{4, i}] == bracket4[static_cast<std::size_t>(i)]);
  CHECK(rung_counts[{0, 0}] == 5);

  // independent analytic oracle in exact integer arithmetic:
  // sum over brackets of sum over rungs of n_i * R * eta^(s_max - s + i)
  std::int64_t oracle_scaled = 0;
  const std::int64_t R = 100, eta = 3;
  const int s_max = 4;
  for (int s = s_max; s >= 0; --s) {
    std::int64_t eta_s = 1;
    for (int k = 0; k < s; ++k) eta_s *= eta;
    const std::int64_t n = ((s_max + 1) * eta_s + s) / (s + 1);
    for (int i = 0; i <= s; ++i) {
      std::int64_t n_i = n;
      std::int64_t scaled_budget = R;
      for (int k = 0; k < i; ++k) n_i /= eta;
      for (int k = 0; k < s_max - s + i; ++k) scaled_budget *= eta;
      oracle_scaled += n_i * scaled_budget;
    }
  }
  CHECK(result.consumed_scaled == oracle_scaled);
  CHECK(result.budget_scale == 81);
}

TEST_CASE("keep rule: survivors are exactly the top keep_k of the logged rung") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator(deterministic_surface);
  const TunerResult result =
      run_fairband(space, evaluator, 27, 3, AlphaPolicy::fixed(0.5), 33);

  std::map<std::pair<int, int>, std::vector<const TrialRecord*>> rungs;
  for (const TrialRecord& trial : result.trials)
    rungs[{trial.bracket, trial.rung}].push_back(&trial);

  for (const auto& [key, trials] : rungs) {
    const auto next = rungs.find({key.first, key.second + 1});
    if (next == rungs.end()) continue;
    // expected survivors: re-sort this rung by (goal desc, id asc)
    std::vector<const TrialRecord*> sorted = trials;
    std::sort(sorted.begin(), sorted.end(), [](const TrialRecord* a, const TrialRecord* b) {
      if (a->goal != b->goal) return a->goal > b->goal;
      return a->config.id < b->config.id;
    });
    std::set<std::int64_t> expected;
    for (std::size_t i = 0; i < next->second.size(); ++i) expected.insert(sorted[i]->config.id);
    std::set<std::int64_t> actual;
    for (const TrialRecord* t : next->second) actual.insert(t->config.id);
    CHECK(expected == actual);
  }
}

TEST_CASE("failed evaluations rank last but stay in the log") {
  const SearchSpace space = demo_space();
  const FnEvaluator evaluator([](const EvaluationRequest& request) {
    if (request.config.number("x") > 0.6) return EvalOutcome::failure("too far right");
    return deterministic_surface(request);
  });
  const TunerResult result =
      run_fairband(space, evaluator, 9, 3, AlphaPolicy::fixed(0.5), 2);
  std::size_t failed = 0;
  for (const TrialRecord& trial : result.trials)
    if (trial.failed) {
      ++failed;
      CHECK(trial.error == "too far right");
      CHECK(std::isnan(trial.goal));
    }
  CHECK(failed > 0);  // with seed 2 some sampled configs have x > 0.6

  // no failed configuration may survive a rung where a successful one was cut
  std::map<std::pair<int, int>, std::vector<const TrialRecord*>> rungs;
  for (const TrialRecord& trial : result.trials)
    rungs[{trial.bracket, trial.rung}].push_back(&trial);
  for (const auto& [key, trials] : rungs) {
    const auto next = rungs.find({key.first, key.second + 1});
    if (next == rungs.end()) continue;
    std::set<std::int64_t> survivors;
    for (const TrialRecord* t : next->second) survivors.insert(t->config.id);
    std::size_t successful_cut = 0, failed_kept = 0;
    for (const TrialRecord* t : trials) {
      if (!t->failed && survivors.count(t->config.id) == 0) ++successful_cut;
      if (t->failed && survivors.count(t->config.id) != 0) ++failed_kept;
    }
    if (failed_kept > 0) CHECK(successful_cut == 0);
  }
}

TEST_CASE("auto alpha is recomputable from each rung's means and lies in [0,1]") {
  const SearchSpace space = demo_space();
  const SurfaceSpec surface = random_surface(space, 77, 0.1);
  const SyntheticEvaluator evaluator(surface);
  const TunerResult result =
      run_fairband(space, evaluator, 100, 3, AlphaPolicy::automatic(), 5);

  std::map<std::pair<int, int>, std::vector<const TrialRecord*>> rungs;
  for (const TrialRecord& trial : result.trials)
    rungs[{trial.bracket, trial.rung}].push_back(&trial);
  for (const auto& [key, trials] : rungs) {
    (void)key;
    double sum_a = 0.0, sum_f = 0.0;
    std::size_t n = 0;
    for (const TrialRecord* t : trials) {
      if (t->failed) continue;
      sum_a += t->accuracy;
      sum_f += t->fairness;
      ++n;
    }
    REQUIRE(n > 0);
    const double expected = dynamic_alpha(sum_f / n, sum_a / n);
    for (const TrialRecord* t : trials) {
      CHECK(t->alpha_used == expected);
      CHECK(t->alpha_used >= 0.0);
      CHECK(t->alpha_used <= 1.0);
    }
  }
}

TEST_CASE("fairband is deterministic across worker counts") {
  const SearchSpace space = demo_space();
  const SurfaceSpec surface = random_surface(space, 3, 0.05);
  const SyntheticEvaluator evaluator(surface);
  const TunerResult serial =
      run_fairband(space, evaluator, 27, 3, AlphaPolicy::automatic(), 8, {}, 1);
  const TunerResult parallel =
      run_fairband(space, evaluator, 27, 3, AlphaPolicy::automatic(), 8, {}, 4);
  REQUIRE(serial.trials.size() == parallel.trials.size());
  for (std::size_t i = 0; i < serial.trials.size(); ++i) {
    CHECK(serial.trials[i].config.assignments == parallel.trials[i].config.assignments);
    CHECK(serial.trials[i].goal == parallel.trials[i].goal);
    CHECK(serial.trials[i].alpha_used == parallel.trials[i].alpha_used);
    CHECK(serial.trials[i].seed == parallel.trials[i].seed);
  }
  CHECK(serial.consumed_scaled == parallel.consumed_scaled);
}

// independent accuracy-only Hyperband oracle sharing only the documented
// sampling streams
namespace {
Configuration hb_oracle_winner(const SearchSpace& space, const Evaluator& evaluator,
                               std::int64_t R, std::int64_t eta, std::uint64_t master) {
  int s_max = 0;
  std::int64_t power = 1;
  while (power <= R / eta) {
    power *= eta;
    ++s_max;
  }
  std::uint64_t slot = 0;
  std::int64_t next_id = 0;
  struct Eval {
    Configuration config;
    double accuracy;
    double budget;
  };
  std::vector<Eval> all;
  for (int s = s_max; s >= 0; --s) {
    std::int64_t eta_s = 1;
    for (int k = 0; k < s; ++k) eta_s *= eta;
    const std::int64_t n = ((s_max + 1) * eta_s + s) / (s + 1);
    std::vector<Configuration> configs;
    for (std::int64_t j = 0; j < n; ++j) {
      Rng rng(derive_stream(master, "fairband-sample", slot++));
      Configuration config = sample_configuration(space, rng);
      config.id = next_id++;
      configs.push_back(std::move(config));
    }
    for (int i = 0; i <= s; ++i) {
      std::int64_t n_i = n;
      for (int k = 0; k < i; ++k) n_i /= eta;
      // exact rung budget: R * eta^(s_max - s + i) scaled by eta^s_max
      std::int64_t budget_scaled = R;
      for (int k = 0; k < s_max - s + i; ++k) budget_scaled *= eta;
      const double budget =
          static_cast<double>(budget_scaled) / static_cast<double>(power);
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t c = 0; c < configs.size(); ++c) {
        const EvalOutcome outcome =
            evaluator.evaluate({configs[c], budget / 100.0, 0, {}});
        REQUIRE(outcome.ok);
        scored.emplace_back(outcome.result.accuracy, c);
        all.push_back({configs[c], outcome.result.accuracy, budget});
      }
      if (i == s) break;
      std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return configs[a.second].id < configs[b.second].id;
      });
      const std::int64_t keep = n_i / eta;
      std::vector<Configuration> kept;
      std::vector<std::size_t> keep_idx;
      for (std::int64_t k = 0; k < keep; ++k) keep_idx.push_back(scored[k].second);
      std::sort(keep_idx.begin(), keep_idx.end());
      for (std::size_t idx : keep_idx) kept.push_back(configs[idx]);
      configs = std::move(kept);
    }
  }
  const Eval* best = nullptr;
  for (const Eval& e : all) {
    if (best == nullptr) {
      best = &e;
      continue;
    }
    bool better = false;
    if (e.accuracy != best->accuracy) better = e.accuracy > best->accuracy;
    else if (e.budget != best->budget) better = e.budget > best->budget;
    else better = e.config.id < best->config.id;
    if (better) best = &e;
  }
  return best->config;
}
}  // namespace

TEST_CASE("alpha = 1 Fairband selects exactly what an accuracy-only HB oracle selects") {
  const SearchSpace space = demo_space();
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const SurfaceSpec surface = random_surface(space, seed * 11 + 1, 0.08);
    const SyntheticEvaluator evaluator(surface);
    const TunerResult result =
        run_fairband(space, evaluator, 27, 3, AlphaPolicy::fixed(1.0), seed);
    const Selection selection = select_model(result.trials, AlphaPolicy::fixed(1.0));
    const Configuration oracle = hb_oracle_winner(space, evaluator, 27, 3, seed);
    CHECK(selection.config.assignments == oracle.assignments);
    CHECK(selection.config.id == oracle.id);
  }
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

TEST_CASE("single trial wins under any policy") {
  TrialRecord trial;
  trial.config.id = 3;
  trial.accuracy = 0.4;
  trial.fairness = 0.9;
  trial.goal = 0.65;
  trial.alpha_used = 0.5;
  trial.budget_units = 100;
  const Selection s1 = select_model({trial}, AlphaPolicy::fixed(0.2));
  CHECK(s1.config.id == 3);
  const Selection s2 = select_model({trial}, AlphaPolicy::automatic());
  CHECK(s2.config.id == 3);
  CHECK(s2.alpha == dynamic_alpha(0.9, 0.4));
}

TEST_CASE("pure fairness weight picks the fairer trial") {
  std::vector<TrialRecord> trials(2);
  trials[0].config.id = 0;
  trials[0].accuracy = 0.9;
  trials[0].fairness = 0.1;
  trials[0].budget_units = 100;
  trials[1].config.id = 1;
  trials[1].accuracy = 0.5;
  trials[1].fairness = 0.5;
  trials[1].budget_units = 100;
  const Selection selection = select_model(trials, AlphaPolicy::fixed(0.0));
  CHECK(selection.config.id == 1);
}

TEST_CASE("auto selection matches a brute-force oracle over random trials") {
  Rng rng(404);
  for (int round = 0; round < 30; ++round) {
    std::vector<TrialRecord> trials(20);
    for (std::size_t i = 0; i < trials.size(); ++i) {
      trials[i].config.id = static_cast<std::int64_t>(i);
      trials[i].accuracy = rng.uniform01();
      trials[i].fairness = rng.uniform01();
      trials[i].budget_units = rng.bounded(2) == 0 ? 100.0 : 33.0;
    }
    // oracle: mean f / mean a -> alpha by the heuristic, then scan for max g
    double mean_a = 0.0, mean_f = 0.0;
    for (const TrialRecord& t : trials) {
      mean_a += t.accuracy;
      mean_f += t.fairness;
    }
    mean_a /= 20.0;
    mean_f /= 20.0;
    const double alpha = 0.5 * (mean_f - mean_a) + 0.5;
    std::size_t best = 0;
    double best_g = -1.0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const double g = alpha * trials[i].accuracy + (1.0 - alpha) * trials[i].fairness;
      const bool better =
          g > best_g ||
          (g == best_g && (trials[i].budget_units > trials[best].budget_units ||
                           (trials[i].budget_units == trials[best].budget_units &&
                            trials[i].config.id < trials[best].config.id)));
      if (better) {
        best_g = g;
        best = i;
      }
    }
    const Selection selection = select_model(trials, AlphaPolicy::automatic());
    CHECK(selection.config.id == trials[best].config.id);
    CHECK(selection.alpha == doctest::Approx(alpha).epsilon(1e-12));
  }
}

TEST_CASE("ties break toward larger budget then smaller id") {
  std::vector<TrialRecord> trials(3);
  for (std::size_t i = 0; i < 3; ++i) {
    trials[i].config.id = static_cast<std::int64_t>(i);
    trials[i].accuracy = 0.6;
    trials[i].fairness = 0.6;
  }
  trials[0].budget_units = 33.0;
  trials[1].budget_units = 100.0;
  trials[2].budget_units = 100.0;
  const Selection selection = select_model(trials, AlphaPolicy::fixed(0.5));
  CHECK(selection.config.id == 1);

  std::vector<TrialRecord> none;
  CHECK_THROWS_AS(select_model(none, AlphaPolicy::fixed(0.5)), TunerError);
}

TEST_SUITE_END();
