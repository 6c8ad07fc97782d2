#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairhpo/rng.hpp"

namespace fairhpo {

// Model scores with binary labels and sensitive-group ids, the input of all
// metric computation. All three vectors are parallel.
struct LabeledScores {
  std::vector<double> scores;        // higher = more positive
  std::vector<std::uint8_t> labels;  // {0, 1}
  std::vector<std::int32_t> groups;

  std::size_t size() const { return scores.size(); }
  void validate() const;  // throws MetricError on length mismatch / empty
};

struct ThresholdTarget {
  enum class Mode { FprAt, RecallAt, TopK };
  Mode mode = Mode::FprAt;
  double value = 0.0;   // rate in [0,1] for FprAt / RecallAt
  std::int64_t k = 0;   // positive count for TopK

  static ThresholdTarget fpr_at(double rate);
  static ThresholdTarget recall_at(double rate);
  static ThresholdTarget top_k(std::int64_t k);
};

// Score-threshold decision rule with randomized tie handling. Calibration
// remembers its exact tie choices (`calibration_predictions`) so that the
// calibration dataset reproduces the target counts exactly; `apply` is the
// label-blind generalization used on other datasets: rows strictly above the
// threshold are positive and tied rows are included at `tie_rate` via a
// seeded shuffle.
struct DecisionRule {
  double threshold = 0.0;
  double tie_rate = 0.0;                        // fraction of tied rows to admit
  std::uint64_t tie_seed = 0;
  std::vector<bool> calibration_predictions;    // exact decisions on the calibration data
  std::vector<std::size_t> tie_inclusion;       // calibration row indices admitted at the tie

  std::vector<bool> apply(std::span<const double> scores) const;
};

// Chooses the threshold and tie inclusions so that applying the rule to
// `data` realizes the target exactly: floor(value * N_neg) false positives
// (FprAt), ceil(value * N_pos) true positives (RecallAt) or exactly K
// positive predictions (TopK, clamped to the dataset size with a warning).
// Boundary ties are untied by seeded random inclusion.
DecisionRule calibrate_threshold(const LabeledScores& data, const ThresholdTarget& target,
                                 Rng& rng, std::vector<std::string>* warnings = nullptr);

struct ConfusionCells {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t negatives() const { return fp + tn; }
  std::int64_t positives() const { return tp + fn; }
};

struct GroupConfusion {
  std::map<std::int32_t, ConfusionCells> by_group;
  ConfusionCells total() const;
};

GroupConfusion confusion_by_group(const LabeledScores& data, const std::vector<bool>& predictions);

// min/max ratio of group-wise false positive rates over groups with at least
// `min_support` negatives. Returns 1 when all qualifying rates are zero or
// only one group qualifies; throws MetricError when no group qualifies.
double predictive_equality(const GroupConfusion& confusion, std::int64_t min_support);

// Same ratio over true positive rates, support counted over positives.
double equal_opportunity(const GroupConfusion& confusion, std::int64_t min_support);

enum class AccuracyKind { Recall, Precision };

// Recall = TP/(TP+FN) (throws on zero positives); precision = TP/(TP+FP)
// (returns 0 with a warning when nothing is predicted positive).
double accuracy_metric(const LabeledScores& data, const std::vector<bool>& predictions,
                       AccuracyKind kind, std::vector<std::string>* warnings = nullptr);

struct TradeoffPoint {
  double a = 0.0;  // predictive accuracy
  double f = 0.0;  // fairness
};

// g = alpha * a + (1 - alpha) * f. Inputs validated to [0,1].
double scalarize(const TradeoffPoint& point, double alpha);

// alpha = 0.5 * (mean_f - mean_a) + 0.5, always in [0,1] for valid inputs.
double dynamic_alpha(double mean_f, double mean_a);

// Indices of the points not strictly dominated (p dominates q when p >= q on
// both coordinates and > on at least one). Exact ties never dominate each
// other, so duplicates of a frontier point are all kept.
std::vector<std::size_t> pareto_frontier(std::span<const TradeoffPoint> points);

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test: D = sup |ECDF1 - ECDF2|, p-value from
// the asymptotic Kolmogorov series at effective size n*m/(n+m).
KsResult ks_test(std::span<const double> sample1, std::span<const double> sample2);

}  // namespace fairhpo
