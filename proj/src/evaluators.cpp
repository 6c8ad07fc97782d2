#include "fairhpo/evaluators.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairhpo/errors.hpp"

namespace fairhpo {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

double softplus(double u) {
  // log(1 + e^u) without overflow.
  return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

std::atomic<SliceAuditHook> g_slice_audit{nullptr};

}  // namespace

void set_slice_audit_hook(SliceAuditHook hook) { g_slice_audit.store(hook); }

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

double LinearModel::score(std::span<const double> row) const {
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double x = feature_mean.empty() ? row[j] : (row[j] - feature_mean[j]) / feature_scale[j];
    z += weights[j] * x;
  }
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> LinearModel::score_all(const Dataset& data) const {
  std::vector<double> out(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = score(data.row(r));
  return out;
}

LogregGradient logreg_loss_gradient(const Dataset& data, std::span<const double> weights,
                                    double bias, double l2_penalty, bool balanced) {
  const std::size_t n = data.n_rows();
  const std::size_t d = data.n_cols;
  if (weights.size() != d) throw TrainingError("logreg: weight dimension mismatch");

  double w_pos = 1.0, w_neg = 1.0;
  if (balanced) {
    const auto n_pos = static_cast<double>(data.positives());
    const auto n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0)
      throw TrainingError("logreg: balanced weighting needs both classes present");
    w_pos = static_cast<double>(n) / (2.0 * n_pos);
    w_neg = static_cast<double>(n) / (2.0 * n_neg);
  }

  LogregGradient g;
  g.grad_weights.assign(d, 0.0);
  double total_weight = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = data.row(r);
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += weights[j] * row[j];
    const double y = data.labels[r];
    const double c = data.labels[r] == 1 ? w_pos : w_neg;
    const double p = 1.0 / (1.0 + std::exp(-z));
    g.loss += c * softplus(y == 1.0 ? -z : z);
    const double err = c * (p - y);
    for (std::size_t j = 0; j < d; ++j) g.grad_weights[j] += err * row[j];
    g.grad_bias += err;
    total_weight += c;
  }
  g.loss /= total_weight;
  g.grad_bias /= total_weight;
  double norm2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    g.grad_weights[j] = g.grad_weights[j] / total_weight + l2_penalty * weights[j];
    norm2 += weights[j] * weights[j];
  }
  g.loss += 0.5 * l2_penalty * norm2;
  return g;
}

LinearModel train_logreg(const Dataset& slice, const LogregParams& params, std::uint64_t seed) {
  (void)seed;  // zero initialization and full-batch descent are deterministic
  if (slice.n_rows() == 0) throw TrainingError("logreg: empty training slice");
  const std::size_t d = slice.n_cols;

  LinearModel model;
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < slice.n_rows(); ++r) mean += slice.row(r)[j];
    mean /= static_cast<double>(slice.n_rows());
    double var = 0.0;
    for (std::size_t r = 0; r < slice.n_rows(); ++r) {
      const double dv = slice.row(r)[j] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(slice.n_rows());
    model.feature_mean[j] = mean;
    model.feature_scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  Dataset scaled = slice;
  for (std::size_t r = 0; r < scaled.n_rows(); ++r) {
    double* row = scaled.features.data() + r * d;
    for (std::size_t j = 0; j < d; ++j)
      row[j] = (row[j] - model.feature_mean[j]) / model.feature_scale[j];
  }

  model.weights.assign(d, 0.0);
  model.bias = 0.0;
  for (std::int64_t epoch = 0; epoch < params.epochs; ++epoch) {
    const LogregGradient g = logreg_loss_gradient(scaled, model.weights, model.bias,
                                                  params.l2_penalty, params.balanced);
    if (!std::isfinite(g.loss))
      throw TrainingError("logreg diverged: non-finite loss at epoch " + std::to_string(epoch));
    for (std::size_t j = 0; j < d; ++j) model.weights[j] -= params.learning_rate * g.grad_weights[j];
    model.bias -= params.learning_rate * g.grad_bias;
  }
  for (double w : model.weights)
    if (!std::isfinite(w)) throw TrainingError("logreg diverged: non-finite weights");
  return model;
}

// ---------------------------------------------------------------------------
// Decision tree
// ---------------------------------------------------------------------------

double TreeModel::score(std::span<const double> row) const {
  std::int32_t at = 0;
  while (nodes[at].feature >= 0)
    at = row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
  return nodes[at].score;
}

std::vector<double> TreeModel::score_all(const Dataset& data) const {
  std::vector<double> out(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = score(data.row(r));
  return out;
}

namespace {

double impurity(double pos, double n, bool entropy) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  if (!entropy) return 2.0 * p * (1.0 - p);  // gini for two classes
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

struct TreeBuilder {
  const Dataset& data;
  const TreeParams& params;
  std::vector<TreeNode> nodes;

  std::int32_t build(std::vector<std::uint32_t> rows, std::int64_t depth) {
    const auto n = static_cast<double>(rows.size());
    double pos = 0.0;
    for (std::uint32_t r : rows) pos += data.labels[r];

    const auto node_index = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({});
    nodes[node_index].score = (pos + 1.0) / (n + 2.0);

    const bool pure = pos == 0.0 || pos == n;
    if (depth >= params.max_depth || pure ||
        rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf))
      return node_index;

    const double parent_impurity = impurity(pos, n, params.entropy);
    double best_gain = -1.0;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::uint8_t>> ordered(rows.size());
    for (std::size_t feature = 0; feature < data.n_cols; ++feature) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        ordered[i] = {data.row(rows[i])[feature], data.labels[rows[i]]};
      std::sort(ordered.begin(), ordered.end());

      double left_pos = 0.0;
      for (std::size_t k = 1; k < ordered.size(); ++k) {
        left_pos += ordered[k - 1].second;
        if (ordered[k - 1].first == ordered[k].first) continue;
        const auto left_n = static_cast<double>(k);
        const double right_n = n - left_n;
        if (k < static_cast<std::size_t>(params.min_samples_leaf) ||
            rows.size() - k < static_cast<std::size_t>(params.min_samples_leaf))
          continue;
        const double gain = parent_impurity -
                            (left_n / n) * impurity(left_pos, left_n, params.entropy) -
                            (right_n / n) * impurity(pos - left_pos, right_n, params.entropy);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(feature);
          best_threshold = 0.5 * (ordered[k - 1].first + ordered[k].first);
        }
      }
    }

    // Zero-gain splits are allowed (impurity never increases under a split);
    // depth and leaf-size limits bound the growth.
    if (best_feature < 0 || best_gain < -1e-12) return node_index;

    std::vector<std::uint32_t> left_rows, right_rows;
    for (std::uint32_t r : rows) {
      (data.row(r)[best_feature] <= best_threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes[node_index].feature = best_feature;
    nodes[node_index].threshold = best_threshold;
    const std::int32_t left = build(std::move(left_rows), depth + 1);
    nodes[node_index].left = left;
    const std::int32_t right = build(std::move(right_rows), depth + 1);
    nodes[node_index].right = right;
    return node_index;
  }
};

}  // namespace

TreeModel train_tree(const Dataset& slice, const TreeParams& params, std::uint64_t seed) {
  (void)seed;  // greedy split search is deterministic
  if (slice.n_rows() == 0) throw TrainingError("tree: empty training slice");
  if (params.max_depth < 0 || params.min_samples_leaf < 1)
    throw TrainingError("tree: invalid hyperparameters");
  TreeBuilder builder{slice, params, {}};
  std::vector<std::uint32_t> rows(slice.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  builder.build(std::move(rows), 0);
  return TreeModel{std::move(builder.nodes)};
}

// ---------------------------------------------------------------------------
// Built-in evaluator
// ---------------------------------------------------------------------------

BuiltinEvaluator::BuiltinEvaluator(Dataset train, Dataset validation,
                                   std::vector<double> slice_fractions, std::uint64_t seed,
                                   std::vector<std::string> undersampling_options,
                                   std::string selector_name, std::string undersampling_name)
    : validation_(std::move(validation)),
      selector_name_(std::move(selector_name)),
      undersampling_name_(std::move(undersampling_name)) {
  if (undersampling_options.empty()) undersampling_options = {"none"};
  std::sort(slice_fractions.begin(), slice_fractions.end());
  slice_fractions.erase(std::unique(slice_fractions.begin(), slice_fractions.end()),
                        slice_fractions.end());
  for (std::size_t i = 0; i < undersampling_options.size(); ++i) {
    const std::string& key = undersampling_options[i];
    std::optional<double> target;
    if (key != "none") {
      char* end = nullptr;
      const double v = std::strtod(key.c_str(), &end);
      if (end != key.c_str() + key.size() || !(v > 0.0 && v < 1.0))
        throw ConfigError("undersampling option '" + key + "' is not a rate in (0,1) or 'none'");
      target = v;
    }
    Variant variant;
    variant.key = key;
    variant.train = undersample(train, target, derive_stream(seed, "undersample", i), &warnings_);
    variant.plan = nested_slices(variant.train, slice_fractions, derive_stream(seed, "slices", i),
                                 &warnings_);
    variants_.push_back(std::move(variant));
  }
}

const BuiltinEvaluator::Variant& BuiltinEvaluator::variant_for(const Configuration& config) const {
  std::string key = "none";
  if (const ParamValue* v = config.find(undersampling_name_)) {
    const std::string* s = std::get_if<std::string>(v);
    if (s == nullptr) throw TrainingError("undersampling assignment must be categorical");
    key = *s;
  }
  for (const auto& variant : variants_)
    if (variant.key == key) return variant;
  throw TrainingError("no precomputed undersampling variant for '" + key + "'");
}

namespace {

std::vector<double> train_and_score(const BuiltinEvaluator&, const Dataset& slice,
                                    const Dataset& target, const Configuration& config,
                                    const std::string& selector_name, std::uint64_t seed) {
  const std::string& model_type = config.category(selector_name);
  if (model_type == "logreg") {
    LogregParams params;
    params.learning_rate = config.number("learning_rate");
    params.l2_penalty = config.number("l2_penalty");
    params.epochs = config.integer("epochs");
    params.balanced = config.category("class_weighting") == "balanced";
    return train_logreg(slice, params, seed).score_all(target);
  }
  if (model_type == "tree") {
    TreeParams params;
    params.max_depth = config.integer("max_depth");
    params.min_samples_leaf = config.integer("min_samples_leaf");
    params.entropy = config.category("split_criterion") == "entropy";
    return train_tree(slice, params, seed).score_all(target);
  }
  throw TrainingError("unknown model type '" + model_type + "'");
}

struct ScoredMetrics {
  double accuracy = 0.0;
  double fairness = 0.0;
};

ScoredMetrics metrics_from_predictions(const LabeledScores& data,
                                       const std::vector<bool>& predictions,
                                       const MetricSpec& spec) {
  ScoredMetrics out;
  out.accuracy = accuracy_metric(data, predictions, spec.accuracy);
  const GroupConfusion confusion = confusion_by_group(data, predictions);
  out.fairness = spec.fairness == FairnessKind::PredictiveEquality
                     ? predictive_equality(confusion, spec.min_support)
                     : equal_opportunity(confusion, spec.min_support);
  return out;
}

}  // namespace

EvalOutcome BuiltinEvaluator::evaluate(const EvaluationRequest& request) const {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Variant& variant = variant_for(request.config);
    const auto& rows = variant.plan.rows_for_fraction(request.budget_fraction);
    if (SliceAuditHook hook = g_slice_audit.load()) hook(rows);
    const Dataset slice = subset(variant.train, rows);

    const std::vector<double> scores =
        train_and_score(*this, slice, validation_, request.config, selector_name_, request.seed);
    const LabeledScores val{scores, validation_.labels, validation_.groups};
    Rng rng(derive_stream(request.seed, "threshold"));
    const DecisionRule rule = calibrate_threshold(val, request.metrics.threshold, rng);
    const ScoredMetrics m =
        metrics_from_predictions(val, rule.calibration_predictions, request.metrics);

    EvaluationResult result;
    result.accuracy = m.accuracy;
    result.fairness = m.fairness;
    result.threshold = rule.threshold;
    result.tie_rate = rule.tie_rate;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return EvalOutcome::success(result);
  } catch (const std::exception& e) {
    return EvalOutcome::failure(e.what());
  }
}

FinalEvaluator::FinalEvaluator(const BuiltinEvaluator& search_evaluator, Dataset test)
    : search_(search_evaluator), test_(std::move(test)) {}

FinalEvaluator::Report FinalEvaluator::evaluate(const Configuration& config, std::uint64_t seed,
                                                const MetricSpec& metrics) const {
  const auto t0 = std::chrono::steady_clock::now();
  const BuiltinEvaluator::Variant& variant = search_.variant_for(config);
  const double full = variant.plan.fractions.back();
  const auto& rows = variant.plan.rows_for_fraction(full);
  const Dataset slice = subset(variant.train, rows);

  const std::vector<double> val_scores =
      train_and_score(search_, slice, search_.validation_, config, search_.selector_name_, seed);
  const LabeledScores val{val_scores, search_.validation_.labels, search_.validation_.groups};
  Rng rng(derive_stream(seed, "threshold"));
  const DecisionRule rule = calibrate_threshold(val, metrics.threshold, rng);
  const ScoredMetrics val_metrics =
      metrics_from_predictions(val, rule.calibration_predictions, metrics);

  // The only place test labels are read: scoring the retrained winner with
  // the validation-calibrated rule.
  const std::vector<double> test_scores =
      train_and_score(search_, slice, test_, config, search_.selector_name_, seed);
  const LabeledScores test_data{test_scores, test_.labels, test_.groups};
  const std::vector<bool> test_predictions = rule.apply(test_scores);
  const ScoredMetrics test_metrics = metrics_from_predictions(test_data, test_predictions, metrics);

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Report report;
  report.validation = {val_metrics.accuracy, val_metrics.fairness, rule.threshold, rule.tie_rate,
                       elapsed};
  report.test = {test_metrics.accuracy, test_metrics.fairness, rule.threshold, rule.tie_rate,
                 elapsed};
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic surface
// ---------------------------------------------------------------------------

namespace {

const ParamSpec* find_param(const SearchSpace& space, const std::string& name) {
  for (const auto& p : space.root_params)
    if (p.name == name) return &p;
  if (space.selector.name == name) return &space.selector;
  for (const auto& [cat, params] : space.conditional_subspaces) {
    (void)cat;
    for (const auto& p : params)
      if (p.name == name) return &p;
  }
  return nullptr;
}

double normalized_position(const ParamSpec& spec, const ParamValue& value) {
  switch (spec.kind) {
    case ParamKind::ContinuousUniform:
      return (std::get<double>(value) - spec.low) / (spec.high - spec.low);
    case ParamKind::ContinuousLogUniform:
      return (std::log(std::get<double>(value)) - std::log(spec.low)) /
             (std::log(spec.high) - std::log(spec.low));
    case ParamKind::IntegerUniform: {
      if (spec.ihigh == spec.ilow) return 0.5;
      return static_cast<double>(std::get<std::int64_t>(value) - spec.ilow) /
             static_cast<double>(spec.ihigh - spec.ilow);
    }
    case ParamKind::Categorical:
      return 0.0;  // handled through category offsets
  }
  return 0.0;
}

double shape_response(const ResponseShape& shape, const ParamSpec& spec, const ParamValue& value) {
  if (spec.kind == ParamKind::Categorical) {
    const auto it = shape.category_offsets.find(std::get<std::string>(value));
    return it == shape.category_offsets.end() ? 0.0 : it->second;
  }
  const double u = normalized_position(spec, value);
  const double d = (u - shape.peak) / shape.width;
  return shape.weight * std::exp(-d * d);
}

std::uint64_t config_content_hash(const Configuration& config) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (const auto& [name, value] : config.assignments) {
    h ^= fnv1a64(name);
    splitmix64(h);
    if (const double* d = std::get_if<double>(&value)) {
      h ^= std::bit_cast<std::uint64_t>(*d);
    } else if (const std::int64_t* i = std::get_if<std::int64_t>(&value)) {
      h ^= static_cast<std::uint64_t>(*i) * 0x9e3779b97f4a7c15ULL;
    } else {
      h ^= fnv1a64(std::get<std::string>(value));
    }
    splitmix64(h);
  }
  return h;
}

ResponseShape random_shape(const ParamSpec& spec, Rng& rng) {
  ResponseShape shape;
  if (spec.kind == ParamKind::Categorical) {
    for (const auto& cat : spec.categories)
      shape.category_offsets[cat] = rng.uniform(-0.15, 0.15);
  } else {
    shape.weight = rng.uniform(0.05, 0.35);
    shape.peak = rng.uniform01();
    shape.width = rng.uniform(0.15, 0.5);
  }
  return shape;
}

}  // namespace

SurfaceSpec random_surface(const SearchSpace& space, std::uint64_t seed, double noise_scale) {
  SurfaceSpec surface;
  surface.space = space;
  surface.seed = seed;
  surface.noise_scale = noise_scale;
  Rng rng(derive_stream(seed, "surface"));
  auto add = [&](const ParamSpec& p) {
    surface.accuracy_shapes[p.name] = random_shape(p, rng);
    surface.fairness_shapes[p.name] = random_shape(p, rng);
  };
  for (const auto& p : space.root_params) add(p);
  add(space.selector);
  for (const auto& [cat, params] : space.conditional_subspaces) {
    (void)cat;
    for (const auto& p : params) add(p);
  }
  return surface;
}

TradeoffPoint surface_base(const SurfaceSpec& surface, const Configuration& config) {
  double a = surface.accuracy_base;
  double f = surface.fairness_base;
  for (const auto& [name, value] : config.assignments) {
    const ParamSpec* spec = find_param(surface.space, name);
    if (spec == nullptr) throw TrainingError("surface has no parameter '" + name + "'");
    const auto acc_it = surface.accuracy_shapes.find(name);
    const auto fair_it = surface.fairness_shapes.find(name);
    if (acc_it == surface.accuracy_shapes.end() || fair_it == surface.fairness_shapes.end())
      throw TrainingError("surface has no response for parameter '" + name + "'");
    a += shape_response(acc_it->second, *spec, value);
    f += shape_response(fair_it->second, *spec, value);
  }
  return {clip01(a), clip01(f)};
}

EvalOutcome SyntheticEvaluator::evaluate(const EvaluationRequest& request) const {
  try {
    const double b = request.budget_fraction;
    if (!(b > 0.0 && b <= 1.0))
      return EvalOutcome::failure("budget fraction must be in (0,1]");
    const TradeoffPoint base = surface_base(surface_, request.config);

    double a = base.a, f = base.f;
    const double sigma = surface_.noise_scale * (1.0 - b);
    if (sigma > 0.0) {
      const std::uint64_t h = config_content_hash(request.config) ^ surface_.seed;
      const auto budget_bits = std::bit_cast<std::uint64_t>(b);
      Rng noise_a(derive_stream(h, "synthetic-noise-a", budget_bits));
      Rng noise_f(derive_stream(h, "synthetic-noise-f", budget_bits));
      a = clip01(a + sigma * noise_a.normal01());
      f = clip01(f + sigma * noise_f.normal01());
    }
    EvaluationResult result;
    result.accuracy = a;
    result.fairness = f;
    return EvalOutcome::success(result);
  } catch (const std::exception& e) {
    return EvalOutcome::failure(e.what());
  }
}

}  // namespace fairhpo
