#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairhpo/errors.hpp"
#include "fairhpo/evaluators.hpp"

using namespace fairhpo;

namespace {

Dataset balanced_blob(std::size_t n, std::uint64_t seed) {
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> groups;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 2;
    features.push_back(rng.normal01() + (y == 1 ? 1.0 : -1.0));
    features.push_back(rng.normal01());
    labels.push_back(y);
    groups.push_back(static_cast<std::int32_t>(rng.bounded(2)));
  }
  return make_dataset(std::move(features), 2, std::move(labels), std::move(groups));
}

// Perfectly separable on the first feature.
Dataset separable(std::size_t n, std::uint64_t seed) {
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> groups;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 2;
    features.push_back(y == 1 ? 1.5 + rng.uniform01() : -1.5 - rng.uniform01());
    features.push_back(rng.uniform01());
    labels.push_back(y);
    groups.push_back(static_cast<std::int32_t>(i % 3 == 0 ? 1 : 0));
  }
  return make_dataset(std::move(features), 2, std::move(labels), std::move(groups));
}

Configuration logreg_config(double lr, double l2, std::int64_t epochs,
                            const std::string& weighting = "none") {
  Configuration config;
  config.id = 0;
  config.assignments["model"] = std::string("logreg");
  config.assignments["learning_rate"] = lr;
  config.assignments["l2_penalty"] = l2;
  config.assignments["epochs"] = epochs;
  config.assignments["class_weighting"] = weighting;
  return config;
}

Configuration tree_config(std::int64_t depth, std::int64_t min_leaf,
                          const std::string& criterion = "gini") {
  Configuration config;
  config.id = 1;
  config.assignments["model"] = std::string("tree");
  config.assignments["max_depth"] = depth;
  config.assignments["min_samples_leaf"] = min_leaf;
  config.assignments["split_criterion"] = criterion;
  return config;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return v[l] < v[r]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<double>(i);
    return rank;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

std::vector<std::vector<std::uint32_t>> g_audited_slices;
void audit_hook(std::span<const std::uint32_t> rows) {
  g_audited_slices.emplace_back(rows.begin(), rows.end());
}

}  // namespace

TEST_SUITE_BEGIN("evaluators");

// ---------------------------------------------------------------------------
// logistic regression
// ---------------------------------------------------------------------------

TEST_CASE("zero weights on balanced data give log-loss ln 2") {
  const Dataset data = balanced_blob(200, 1);
  const std::vector<double> w(data.n_cols, 0.0);
  const LogregGradient g = logreg_loss_gradient(data, w, 0.0, 0.0, false);
  CHECK(g.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences") {
  const Dataset data = balanced_blob(60, 2);
  Rng rng(3);
  const double h = 1e-5;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> w(data.n_cols);
    for (double& x : w) x = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-1.0, 1.0);
    const double l2 = point % 3 == 0 ? 0.0 : rng.uniform01();
    const bool balanced = point % 2 == 0;

    const LogregGradient g = logreg_loss_gradient(data, w, b, l2, balanced);
    for (std::size_t j = 0; j < w.size(); ++j) {
      std::vector<double> up = w, down = w;
      up[j] += h;
      down[j] -= h;
      const double fd = (logreg_loss_gradient(data, up, b, l2, balanced).loss -
                         logreg_loss_gradient(data, down, b, l2, balanced).loss) /
                        (2.0 * h);
      const double rel = std::abs(fd - g.grad_weights[j]) /
                         std::max(1e-6, std::abs(g.grad_weights[j]));
      CHECK(rel <= 1e-5);
    }
    const double fd_b = (logreg_loss_gradient(data, w, b + h, l2, balanced).loss -
                         logreg_loss_gradient(data, w, b - h, l2, balanced).loss) /
                        (2.0 * h);
    CHECK(std::abs(fd_b - g.grad_bias) / std::max(1e-6, std::abs(g.grad_bias)) <= 1e-5);
  }
}

TEST_CASE("stronger l2 shrinks the weight norm") {
  const Dataset data = balanced_blob(300, 4);
  const LinearModel model_weak = train_logreg(data, {0.1, 0.0, 300, false}, 0);
  const LinearModel model_strong = train_logreg(data, {0.1, 5.0, 300, false}, 0);
  auto norm = [](const LinearModel& m) {
    double s = 0.0;
    for (double w : m.weights) s += w * w;
    return std::sqrt(s);
  };
  CHECK(norm(model_strong) < norm(model_weak));
}

TEST_CASE("zero epochs leave the initial model: constant scores 0.5") {
  const Dataset data = balanced_blob(50, 5);
  const LinearModel model = train_logreg(data, {0.1, 0.0, 0, false}, 0);
  for (double s : model.score_all(data)) CHECK(s == 0.5);
}

TEST_CASE("logreg training is deterministic") {
  const Dataset data = balanced_blob(150, 6);
  const LinearModel a = train_logreg(data, {0.3, 0.01, 50, true}, 0);
  const LinearModel b = train_logreg(data, {0.3, 0.01, 50, true}, 0);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

// ---------------------------------------------------------------------------
// decision tree
// ---------------------------------------------------------------------------

TEST_CASE("depth zero gives a single leaf at the smoothed prevalence") {
  const Dataset data = balanced_blob(40, 7);
  const TreeModel model = train_tree(data, {0, 1, false}, 0);
  REQUIRE(model.nodes.size() == 1);
  CHECK(model.nodes[0].feature == -1);
  CHECK(model.nodes[0].score == doctest::Approx((20.0 + 1.0) / (40.0 + 2.0)));
}

TEST_CASE("pure XOR is solved exactly at depth two") {
  // enumerate splits: the first cut has zero gain, the second separates
  std::vector<double> features{0, 0, 0, 1, 1, 0, 1, 1};
  std::vector<std::uint8_t> labels{0, 1, 1, 0};
  std::vector<std::int32_t> groups{0, 0, 0, 0};
  Dataset xor_data = make_dataset(std::move(features), 2, std::move(labels), std::move(groups));
  for (const bool entropy : {false, true}) {
    const TreeModel model = train_tree(xor_data, {2, 1, entropy}, 0);
    for (std::size_t r = 0; r < xor_data.n_rows(); ++r) {
      const double score = model.score(xor_data.row(r));
      CHECK((score > 0.5) == (xor_data.labels[r] == 1));
    }
  }
}

TEST_CASE("min_samples_leaf equal to n forces a single leaf") {
  const Dataset data = balanced_blob(30, 8);
  const TreeModel model = train_tree(data, {5, 30, false}, 0);
  CHECK(model.nodes.size() == 1);
}

TEST_CASE("tree separates a separable blob") {
  const Dataset data = separable(100, 9);
  const TreeModel model = train_tree(data, {3, 1, false}, 0);
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    CHECK((model.score(data.row(r)) > 0.5) == (data.labels[r] == 1));
}

// ---------------------------------------------------------------------------
// builtin evaluator
// ---------------------------------------------------------------------------

namespace {
MetricSpec recall_spec() {
  MetricSpec spec;
  spec.accuracy = AccuracyKind::Recall;
  spec.fairness = FairnessKind::PredictiveEquality;
  spec.threshold = ThresholdTarget::fpr_at(0.1);
  spec.min_support = 1;
  return spec;
}
}  // namespace

TEST_CASE("separable data reaches recall 1 at any FPR target") {
  const Dataset train = separable(400, 10);
  const Dataset val = separable(200, 11);
  const BuiltinEvaluator evaluator(train, val, {1.0}, 99);
  for (double fpr : {0.0, 0.05, 0.2}) {
    MetricSpec spec = recall_spec();
    spec.threshold = ThresholdTarget::fpr_at(fpr);
    EvaluationRequest request{logreg_config(0.5, 0.0, 200), 1.0, 123, spec};
    const EvalOutcome outcome = evaluator.evaluate(request);
    REQUIRE(outcome.ok);
    CHECK(outcome.result.accuracy == 1.0);
  }
}

TEST_CASE("identical requests give identical results") {
  const Dataset train = balanced_blob(500, 12);
  const Dataset val = balanced_blob(200, 13);
  const BuiltinEvaluator evaluator(train, val, {0.25, 1.0}, 7);
  EvaluationRequest request{tree_config(4, 2), 0.25, 55, recall_spec()};
  const EvalOutcome first = evaluator.evaluate(request);
  const EvalOutcome second = evaluator.evaluate(request);
  REQUIRE(first.ok);
  REQUIRE(second.ok);
  CHECK(first.result.accuracy == second.result.accuracy);
  CHECK(first.result.fairness == second.result.fairness);
  CHECK(first.result.threshold == second.result.threshold);
}

TEST_CASE("zero-epoch logreg behaves like a constant-score model") {
  const Dataset train = balanced_blob(200, 14);
  const Dataset val = balanced_blob(100, 15);
  const BuiltinEvaluator evaluator(train, val, {1.0}, 3);
  EvaluationRequest request{logreg_config(0.1, 0.0, 0), 1.0, 77, recall_spec()};
  const EvalOutcome outcome = evaluator.evaluate(request);
  REQUIRE(outcome.ok);
  // all validation scores tie at 0.5, so the whole dataset sits on the
  // threshold boundary and predictions come from seeded random untying
  CHECK(outcome.result.accuracy >= 0.0);
  CHECK(outcome.result.accuracy <= 1.0);
  CHECK(outcome.result.threshold == 0.5);
  CHECK(outcome.result.tie_rate > 0.0);
}

TEST_CASE("diverging hyperparameters fail the evaluation with a diagnostic") {
  const Dataset train = balanced_blob(100, 16);
  const Dataset val = balanced_blob(50, 17);
  const BuiltinEvaluator evaluator(train, val, {1.0}, 5);
  EvaluationRequest request{logreg_config(1e6, 10.0, 500), 1.0, 9, recall_spec()};
  const EvalOutcome outcome = evaluator.evaluate(request);
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("diverged") != std::string::npos);
}

TEST_CASE("unknown model type is a failed outcome, not a crash") {
  const Dataset train = balanced_blob(60, 18);
  const Dataset val = balanced_blob(30, 19);
  const BuiltinEvaluator evaluator(train, val, {1.0}, 5);
  Configuration config;
  config.assignments["model"] = std::string("boosted-mystery");
  EvaluationRequest request{config, 1.0, 1, recall_spec()};
  const EvalOutcome outcome = evaluator.evaluate(request);
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("boosted-mystery") != std::string::npos);
}

TEST_CASE("slice discipline: evaluation touches exactly the slice rows") {
  const Dataset train = balanced_blob(400, 20);
  const Dataset val = balanced_blob(100, 21);
  const BuiltinEvaluator evaluator(train, val, {0.1, 0.5, 1.0}, 23);
  g_audited_slices.clear();
  set_slice_audit_hook(&audit_hook);
  EvaluationRequest request{tree_config(3, 1), 0.1, 5, recall_spec()};
  REQUIRE(evaluator.evaluate(request).ok);
  set_slice_audit_hook(nullptr);
  REQUIRE(g_audited_slices.size() == 1);
  CHECK(g_audited_slices[0].size() == 40);  // 10% of 400
}

TEST_CASE("undersampling variants honor the configuration's rate") {
  const Dataset train = separable(600, 22);  // 50% prevalence, cannot go below
  const Dataset val = separable(200, 23);
  const BuiltinEvaluator evaluator(train, val, {1.0}, 31, {"0.20", "none"});
  // warnings surface the impossible target instead of failing
  bool warned = false;
  for (const std::string& w : evaluator.warnings())
    if (w.find("below") != std::string::npos) warned = true;
  CHECK(warned);

  Configuration config = logreg_config(0.5, 0.0, 100);
  config.assignments["undersampling"] = std::string("0.20");
  EvaluationRequest request{config, 1.0, 3, recall_spec()};
  CHECK(evaluator.evaluate(request).ok);

  config.assignments["undersampling"] = std::string("0.33");
  EvaluationRequest bad{config, 1.0, 3, recall_spec()};
  const EvalOutcome outcome = evaluator.evaluate(bad);
  CHECK_FALSE(outcome.ok);
}

TEST_CASE("final evaluator retrains at full budget and scores test once") {
  const Dataset train = separable(400, 24);
  const Dataset val = separable(150, 25);
  const Dataset test = separable(150, 26);
  const BuiltinEvaluator evaluator(train, val, {0.5, 1.0}, 41);
  const FinalEvaluator finals(evaluator, test);
  const FinalEvaluator::Report report =
      finals.evaluate(logreg_config(0.5, 0.0, 200), 17, recall_spec());
  CHECK(report.validation.accuracy == 1.0);
  CHECK(report.test.accuracy == 1.0);
  CHECK(report.validation.threshold == report.test.threshold);
}

// ---------------------------------------------------------------------------
// synthetic surface
// ---------------------------------------------------------------------------

namespace {
SearchSpace tiny_space() {
  SearchSpace space;
  space.root_params.push_back(ParamSpec::continuous("x", 0.0, 1.0));
  space.selector = ParamSpec::categorical("model", {"a", "b"});
  space.conditional_subspaces["a"] = {ParamSpec::continuous("u", 0.0, 1.0)};
  space.conditional_subspaces["b"] = {ParamSpec::integer("k", 1, 10)};
  validate_space(space);
  return space;
}
}  // namespace

TEST_CASE("full budget returns the exact noise-free base response") {
  const SearchSpace space = tiny_space();
  const SurfaceSpec surface = random_surface(space, 5, 0.2);
  const SyntheticEvaluator evaluator(surface);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    Configuration config = sample_configuration(space, rng);
    const TradeoffPoint base = surface_base(surface, config);
    const EvalOutcome outcome = evaluator.evaluate({config, 1.0, 42, {}});
    REQUIRE(outcome.ok);
    CHECK(outcome.result.accuracy == base.a);
    CHECK(outcome.result.fairness == base.f);
  }
}

TEST_CASE("synthetic evaluation is deterministic and budget-noise shrinks") {
  const SearchSpace space = tiny_space();
  const SurfaceSpec surface = random_surface(space, 9, 0.3);
  const SyntheticEvaluator evaluator(surface);
  Rng rng(10);
  double dev_low = 0.0, dev_high = 0.0;
  for (int i = 0; i < 300; ++i) {
    const Configuration config = sample_configuration(space, rng);
    const TradeoffPoint base = surface_base(surface, config);
    const EvalOutcome at_low = evaluator.evaluate({config, 0.1, 1, {}});
    const EvalOutcome again = evaluator.evaluate({config, 0.1, 1, {}});
    const EvalOutcome at_high = evaluator.evaluate({config, 0.9, 1, {}});
    REQUIRE(at_low.ok);
    CHECK(at_low.result.accuracy == again.result.accuracy);
    dev_low += std::abs(at_low.result.accuracy - base.a);
    dev_high += std::abs(at_high.result.accuracy - base.a);
    CHECK(at_low.result.accuracy >= 0.0);
    CHECK(at_low.result.accuracy <= 1.0);
  }
  CHECK(dev_high < dev_low);  // sigma(0.9) << sigma(0.1)
}

TEST_CASE("rank correlation across budgets exceeds the fidelity target") {
  const SearchSpace space = tiny_space();
  const SurfaceSpec surface = random_surface(space, 13, 0.05);
  const SyntheticEvaluator evaluator(surface);
  Rng rng(14);
  std::vector<double> g_low, g_full;
  for (int i = 0; i < 100; ++i) {
    const Configuration config = sample_configuration(space, rng);
    const EvalOutcome low = evaluator.evaluate({config, 0.1, 2, {}});
    const EvalOutcome full = evaluator.evaluate({config, 1.0, 2, {}});
    REQUIRE(low.ok);
    REQUIRE(full.ok);
    g_low.push_back(0.5 * low.result.accuracy + 0.5 * low.result.fairness);
    g_full.push_back(0.5 * full.result.accuracy + 0.5 * full.result.fairness);
  }
  CHECK(spearman(g_low, g_full) >= 0.8);
}

TEST_CASE("a parameter unknown to the surface is a dimension mismatch") {
  const SearchSpace space = tiny_space();
  const SurfaceSpec surface = random_surface(space, 5, 0.1);
  const SyntheticEvaluator evaluator(surface);
  Configuration config;
  config.assignments["mystery"] = 0.5;
  const EvalOutcome outcome = evaluator.evaluate({config, 1.0, 3, {}});
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("mystery") != std::string::npos);
}

TEST_SUITE_END();
