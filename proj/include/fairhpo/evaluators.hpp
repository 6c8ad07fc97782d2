#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairhpo/datakit.hpp"
#include "fairhpo/fairmetrics.hpp"
#include "fairhpo/searchspace.hpp"

namespace fairhpo {

enum class FairnessKind { PredictiveEquality, EqualOpportunity };

struct MetricSpec {
  AccuracyKind accuracy = AccuracyKind::Recall;
  FairnessKind fairness = FairnessKind::PredictiveEquality;
  ThresholdTarget threshold = ThresholdTarget::fpr_at(0.05);
  std::int64_t min_support = 10;
};

struct EvaluationRequest {
  Configuration config;
  double budget_fraction = 1.0;  // of the training data, in (0, 1]
  std::uint64_t seed = 0;
  MetricSpec metrics;
};

struct EvaluationResult {
  double accuracy = 0.0;
  double fairness = 0.0;
  double threshold = 0.0;
  double tie_rate = 0.0;
  double wall_time_s = 0.0;
};

struct EvalOutcome {
  bool ok = false;
  EvaluationResult result;
  std::string error;

  static EvalOutcome success(EvaluationResult r) { return {true, r, {}}; }
  static EvalOutcome failure(std::string message) { return {false, {}, std::move(message)}; }
};

// Evaluation backends are pure per request and safe to call concurrently.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalOutcome evaluate(const EvaluationRequest& request) const = 0;
};

// ---------------------------------------------------------------------------
// Built-in trainers
// ---------------------------------------------------------------------------

struct LogregParams {
  double learning_rate = 0.1;
  double l2_penalty = 0.0;
  std::int64_t epochs = 100;
  bool balanced = false;  // class_weighting
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean, feature_scale;  // standardization fit on the slice

  double score(std::span<const double> row) const;
  std::vector<double> score_all(const Dataset& data) const;
};

struct LogregGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Weighted, numerically stable l2-regularized log-loss and its gradient on
// the given (already scaled) features. Exposed so tests can check the
// analytic gradient against finite differences.
LogregGradient logreg_loss_gradient(const Dataset& data, std::span<const double> weights,
                                    double bias, double l2_penalty, bool balanced);

// Full-batch gradient descent from zero weights; standardizes features using
// slice statistics. Throws TunerError via EvalOutcome path on non-finite loss.
LinearModel train_logreg(const Dataset& slice, const LogregParams& params, std::uint64_t seed);

struct TreeParams {
  std::int64_t max_depth = 4;
  std::int64_t min_samples_leaf = 1;
  bool entropy = false;  // split_criterion: gini or entropy
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1, right = -1;
  double score = 0.0;  // Laplace-smoothed positive fraction at leaves
};

struct TreeModel {
  std::vector<TreeNode> nodes;

  double score(std::span<const double> row) const;
  std::vector<double> score_all(const Dataset& data) const;
};

TreeModel train_tree(const Dataset& slice, const TreeParams& params, std::uint64_t seed);

// Optional test hook recording which training rows an evaluation touched.
using SliceAuditHook = void (*)(std::span<const std::uint32_t> rows);
void set_slice_audit_hook(SliceAuditHook hook);

// Trains {logreg, tree} configurations on nested slices of the (optionally
// undersampled) training split and scores them on validation with a
// validation-calibrated threshold. Test data never enters this class; final
// test evaluation lives in FinalEvaluator.
class BuiltinEvaluator : public Evaluator {
 public:
  BuiltinEvaluator(Dataset train, Dataset validation, std::vector<double> slice_fractions,
                   std::uint64_t seed, std::vector<std::string> undersampling_options = {"none"},
                   std::string selector_name = "model",
                   std::string undersampling_name = "undersampling");

  EvalOutcome evaluate(const EvaluationRequest& request) const override;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend class FinalEvaluator;
  struct Variant {
    std::string key;
    Dataset train;
    SlicePlan plan;
  };
  const Variant& variant_for(const Configuration& config) const;

  std::vector<Variant> variants_;
  Dataset validation_;
  std::string selector_name_, undersampling_name_;
  std::vector<std::string> warnings_;
};

// Full-budget retrain of a winning configuration plus held-out test scoring
// with the validation-calibrated decision rule.
class FinalEvaluator {
 public:
  FinalEvaluator(const BuiltinEvaluator& search_evaluator, Dataset test);

  struct Report {
    EvaluationResult validation;
    EvaluationResult test;
  };
  Report evaluate(const Configuration& config, std::uint64_t seed, const MetricSpec& metrics) const;

 private:
  const BuiltinEvaluator& search_;
  Dataset test_;
};

// ---------------------------------------------------------------------------
// Synthetic response surface
// ---------------------------------------------------------------------------

// Smooth deterministic response per hyperparameter plus budget-dependent
// noise that shrinks to zero at full budget, so configuration rankings are
// approximately preserved across budgets.
struct ResponseShape {
  double weight = 0.0;  // numeric params: weight * exp(-((u - peak)/width)^2)
  double peak = 0.5;
  double width = 0.25;
  std::map<std::string, double> category_offsets;  // categorical params
};

struct SurfaceSpec {
  SearchSpace space;
  std::map<std::string, ResponseShape> accuracy_shapes;
  std::map<std::string, ResponseShape> fairness_shapes;
  double accuracy_base = 0.45;
  double fairness_base = 0.5;
  double noise_scale = 0.05;  // sigma at budget b is noise_scale * (1 - b)
  std::uint64_t seed = 0;
};

// Seeded random shapes over every parameter of `space`.
SurfaceSpec random_surface(const SearchSpace& space, std::uint64_t seed,
                           double noise_scale = 0.05);

// Noise-free responses (what evaluation at full budget returns).
TradeoffPoint surface_base(const SurfaceSpec& surface, const Configuration& config);

class SyntheticEvaluator : public Evaluator {
 public:
  explicit SyntheticEvaluator(SurfaceSpec surface) : surface_(std::move(surface)) {}
  EvalOutcome evaluate(const EvaluationRequest& request) const override;
  const SurfaceSpec& surface() const { return surface_; }

 private:
  SurfaceSpec surface_;
};

// ---------------------------------------------------------------------------
// External trainer protocol (line-delimited JSON over child stdio)
// ---------------------------------------------------------------------------

struct ExternalTrainerOptions {
  std::string command;            // run through /bin/sh -c
  int workers = 1;                // spawned processes, one in-flight request each
  double timeout_seconds = 600.0;
};

class ExternalEvaluator : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalTrainerOptions options);
  ~ExternalEvaluator() override;

  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  EvalOutcome evaluate(const EvaluationRequest& request) const override;

 private:
  struct Pool;
  std::unique_ptr<Pool> pool_;
};

}  // namespace fairhpo
