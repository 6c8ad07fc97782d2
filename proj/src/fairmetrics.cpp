#include "fairhpo/fairmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fairhpo/errors.hpp"

namespace fairhpo {

namespace {

constexpr double kCountEps = 1e-9;  // guards floor/ceil of rate * count against FP dust

void warn(std::vector<std::string>* warnings, const std::string& msg) {
  if (warnings != nullptr) warnings->push_back(msg);
}

// First k entries of a seeded shuffle, returned in ascending order.
std::vector<std::size_t> pick(const std::vector<std::size_t>& pool, std::size_t k,
                              std::uint64_t seed) {
  std::vector<std::size_t> shuffled = pool;
  Rng rng(seed);
  rng.shuffle(shuffled);
  shuffled.resize(std::min(k, shuffled.size()));
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

// k-th largest value (1-based) of `values`.
double kth_largest(std::vector<double> values, std::size_t k) {
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end(), std::greater<>());
  return values[k - 1];
}

}  // namespace

void LabeledScores::validate() const {
  if (scores.empty()) throw MetricError("LabeledScores: empty data");
  if (labels.size() != scores.size() || groups.size() != scores.size())
    throw MetricError("LabeledScores: scores/labels/groups lengths differ");
  for (std::uint8_t y : labels)
    if (y > 1) throw MetricError("LabeledScores: labels must be 0 or 1");
}

ThresholdTarget ThresholdTarget::fpr_at(double rate) {
  if (rate < 0.0 || rate > 1.0) throw MetricError("fpr_at rate must be in [0,1]");
  return {Mode::FprAt, rate, 0};
}

ThresholdTarget ThresholdTarget::recall_at(double rate) {
  if (rate < 0.0 || rate > 1.0) throw MetricError("recall_at rate must be in [0,1]");
  return {Mode::RecallAt, rate, 0};
}

ThresholdTarget ThresholdTarget::top_k(std::int64_t k) {
  if (k <= 0) throw MetricError("top_k K must be a positive integer");
  return {Mode::TopK, 0.0, k};
}

std::vector<bool> DecisionRule::apply(std::span<const double> scores) const {
  std::vector<bool> out(scores.size(), false);
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > threshold) out[i] = true;
    else if (scores[i] == threshold) tied.push_back(i);
  }
  if (!tied.empty() && tie_rate > 0.0) {
    const auto want = static_cast<std::size_t>(
        std::llround(tie_rate * static_cast<double>(tied.size())));
    for (std::size_t i : pick(tied, want, derive_stream(tie_seed, "apply"))) out[i] = true;
  }
  return out;
}

DecisionRule calibrate_threshold(const LabeledScores& data, const ThresholdTarget& target,
                                 Rng& rng, std::vector<std::string>* warnings) {
  data.validate();
  const std::size_t n = data.size();

  DecisionRule rule;
  rule.tie_seed = rng.next_u64();

  // The class whose count is calibrated exactly; the other class at the tie
  // is admitted at the matching rate so the tie policy stays label-blind in
  // distribution.
  std::vector<double> anchor_scores;  // scores of the exact-count class (or all rows for top-k)
  std::vector<std::size_t> tied_exact, tied_other;
  std::size_t m = 0;  // rows of the anchor class to admit

  const bool is_top_k = target.mode == ThresholdTarget::Mode::TopK;
  std::uint8_t anchor_label = 0;
  if (target.mode == ThresholdTarget::Mode::FprAt) {
    anchor_label = 0;
  } else if (target.mode == ThresholdTarget::Mode::RecallAt) {
    anchor_label = 1;
  }

  if (is_top_k) {
    anchor_scores = data.scores;
    auto k = static_cast<std::size_t>(target.k);
    if (k > n) {
      std::ostringstream os;
      os << "top_k: K=" << target.k << " exceeds dataset size " << n << "; clamped";
      warn(warnings, os.str());
      k = n;
    }
    m = k;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (data.labels[i] == anchor_label) anchor_scores.push_back(data.scores[i]);
    if (anchor_scores.empty())
      throw MetricError(target.mode == ThresholdTarget::Mode::FprAt
                            ? "fpr_at: no negative labels in calibration data"
                            : "recall_at: no positive labels in calibration data");
    const double exact = target.value * static_cast<double>(anchor_scores.size());
    m = target.mode == ThresholdTarget::Mode::FprAt
            ? static_cast<std::size_t>(std::floor(exact + kCountEps))
            : static_cast<std::size_t>(std::ceil(exact - kCountEps));
  }

  std::size_t admit_exact = 0;  // tied anchor rows to admit
  if (m == 0) {
    rule.threshold = *std::max_element(anchor_scores.begin(), anchor_scores.end());
  } else {
    rule.threshold = kth_largest(anchor_scores, m);
    std::size_t above = 0;
    for (double s : anchor_scores)
      if (s > rule.threshold) ++above;
    admit_exact = m - above;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (data.scores[i] != rule.threshold) continue;
    const bool is_anchor = is_top_k || data.labels[i] == anchor_label;
    (is_anchor ? tied_exact : tied_other).push_back(i);
  }

  std::vector<std::size_t> included =
      pick(tied_exact, admit_exact, derive_stream(rule.tie_seed, "exact"));
  if (!tied_other.empty() && !tied_exact.empty()) {
    const double rate =
        static_cast<double>(admit_exact) / static_cast<double>(tied_exact.size());
    const auto admit_other = static_cast<std::size_t>(
        std::llround(rate * static_cast<double>(tied_other.size())));
    auto extra = pick(tied_other, admit_other, derive_stream(rule.tie_seed, "other"));
    included.insert(included.end(), extra.begin(), extra.end());
  }
  std::sort(included.begin(), included.end());
  rule.tie_inclusion = included;

  const std::size_t n_tied = tied_exact.size() + tied_other.size();
  rule.tie_rate = n_tied == 0
                      ? 0.0
                      : static_cast<double>(included.size()) / static_cast<double>(n_tied);

  rule.calibration_predictions.assign(n, false);
  for (std::size_t i = 0; i < n; ++i)
    if (data.scores[i] > rule.threshold) rule.calibration_predictions[i] = true;
  for (std::size_t i : included) rule.calibration_predictions[i] = true;
  return rule;
}

ConfusionCells GroupConfusion::total() const {
  ConfusionCells t;
  for (const auto& [g, c] : by_group) {
    (void)g;
    t.tp += c.tp;
    t.fp += c.fp;
    t.tn += c.tn;
    t.fn += c.fn;
  }
  return t;
}

GroupConfusion confusion_by_group(const LabeledScores& data,
                                  const std::vector<bool>& predictions) {
  data.validate();
  if (predictions.size() != data.size())
    throw MetricError("confusion_by_group: predictions length mismatch");
  GroupConfusion confusion;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ConfusionCells& c = confusion.by_group[data.groups[i]];
    const bool positive = predictions[i];
    if (data.labels[i] == 1) {
      positive ? ++c.tp : ++c.fn;
    } else {
      positive ? ++c.fp : ++c.tn;
    }
  }
  return confusion;
}

namespace {

double rate_ratio(const GroupConfusion& confusion, std::int64_t min_support, bool use_fpr,
                  const char* what) {
  double min_rate = std::numeric_limits<double>::infinity();
  double max_rate = 0.0;
  std::size_t qualifying = 0;
  for (const auto& [group, c] : confusion.by_group) {
    (void)group;
    const std::int64_t support = use_fpr ? c.negatives() : c.positives();
    if (support < min_support) continue;
    ++qualifying;
    const double rate = use_fpr ? static_cast<double>(c.fp) / static_cast<double>(support)
                                : static_cast<double>(c.tp) / static_cast<double>(support);
    min_rate = std::min(min_rate, rate);
    max_rate = std::max(max_rate, rate);
  }
  if (qualifying == 0)
    throw MetricError(std::string(what) + ": no group reaches min_support " +
                      std::to_string(min_support));
  if (qualifying == 1 || max_rate == 0.0) return 1.0;
  return min_rate / max_rate;
}

}  // namespace

double predictive_equality(const GroupConfusion& confusion, std::int64_t min_support) {
  return rate_ratio(confusion, min_support, /*use_fpr=*/true, "predictive_equality");
}

double equal_opportunity(const GroupConfusion& confusion, std::int64_t min_support) {
  return rate_ratio(confusion, min_support, /*use_fpr=*/false, "equal_opportunity");
}

double accuracy_metric(const LabeledScores& data, const std::vector<bool>& predictions,
                       AccuracyKind kind, std::vector<std::string>* warnings) {
  const ConfusionCells c = confusion_by_group(data, predictions).total();
  if (kind == AccuracyKind::Recall) {
    if (c.positives() == 0) throw MetricError("recall undefined: no positive labels");
    return static_cast<double>(c.tp) / static_cast<double>(c.positives());
  }
  const std::int64_t predicted_positive = c.tp + c.fp;
  if (predicted_positive == 0) {
    warn(warnings, "precision: no positive predictions; returning 0");
    return 0.0;
  }
  return static_cast<double>(c.tp) / static_cast<double>(predicted_positive);
}

double scalarize(const TradeoffPoint& point, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw MetricError("scalarize: alpha must be in [0,1]");
  if (!(point.a >= 0.0 && point.a <= 1.0 && point.f >= 0.0 && point.f <= 1.0))
    throw MetricError("scalarize: trade-off point components must be in [0,1]");
  return alpha * point.a + (1.0 - alpha) * point.f;
}

double dynamic_alpha(double mean_f, double mean_a) {
  if (!(mean_f >= 0.0 && mean_f <= 1.0 && mean_a >= 0.0 && mean_a <= 1.0))
    throw MetricError("dynamic_alpha: inputs must be in [0,1]");
  // Algebraic form of 0.5 * (mean_f - mean_a) + 0.5 that lands exactly on the
  // boundary values (and on mean_f when mean_f + mean_a == 1).
  double alpha = mean_f + 0.5 * (1.0 - (mean_f + mean_a));
  if (alpha < 0.0) alpha = 0.0;
  if (alpha > 1.0) alpha = 1.0;
  return alpha;
}

std::vector<std::size_t> pareto_frontier(std::span<const TradeoffPoint> points) {
  if (points.empty()) throw MetricError("pareto_frontier: empty input");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    if (points[lhs].a != points[rhs].a) return points[lhs].a > points[rhs].a;
    return points[lhs].f > points[rhs].f;
  });

  std::vector<std::size_t> frontier;
  double best_f_above = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // One run of equal accuracy; its max fairness is at the front.
    std::size_t j = i;
    const double a = points[order[i]].a;
    const double group_max_f = points[order[i]].f;
    while (j < order.size() && points[order[j]].a == a) ++j;
    for (std::size_t k = i; k < j; ++k) {
      const double f = points[order[k]].f;
      if (f == group_max_f && f > best_f_above) frontier.push_back(order[k]);
    }
    best_f_above = std::max(best_f_above, group_max_f);
    i = j;
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

KsResult ks_test(std::span<const double> sample1, std::span<const double> sample2) {
  if (sample1.empty() || sample2.empty()) throw MetricError("ks_test: empty sample");
  std::vector<double> s1(sample1.begin(), sample1.end());
  std::vector<double> s2(sample2.begin(), sample2.end());
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());

  const auto n = static_cast<double>(s1.size());
  const auto m = static_cast<double>(s2.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < s1.size() && j < s2.size()) {
    const double x = std::min(s1[i], s2[j]);
    while (i < s1.size() && s1[i] == x) ++i;
    while (j < s2.size() && s2[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }

  const double effective = n * m / (n + m);
  const double t = std::sqrt(effective) * d;
  double p = 1.0;
  if (t > 1e-12) {
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100000; ++k) {
      const double term = std::exp(-2.0 * k * k * t * t);
      sum += sign * term;
      if (term < 1e-10) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * sum, 0.0, 1.0);
  }
  return {d, p};
}

}  // namespace fairhpo
