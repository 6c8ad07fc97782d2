#include "fairhpo/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fairhpo/errors.hpp"

namespace fairhpo {

namespace {

constexpr const char* kMissingLevel = "missing";

void warn(std::vector<std::string>* warnings, const std::string& msg) {
  if (warnings != nullptr) warnings->push_back(msg);
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& text, double* out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return false;
  *out = v;
  return true;
}

// RFC-ish CSV row splitter: quoted fields may contain commas and doubled
// quotes. Newlines inside quotes are not supported.
std::vector<std::string> split_csv_row(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DataError("csv line " + std::to_string(lineno) + ": unterminated quote");
  fields.push_back(field);
  return fields;
}

// One-hot / imputation encoder, fit on a chosen row set of the raw table.
struct Encoder {
  struct Numeric {
    std::size_t column;
    double median = 0.0;
  };
  struct Categorical {
    std::size_t column;
    std::vector<std::string> levels;  // sorted
  };
  std::vector<Numeric> numerics;
  std::vector<Categorical> categoricals;

  static Encoder fit(const RawTable& raw, std::span<const std::uint32_t> rows) {
    Encoder enc;
    for (std::size_t c = 0; c < raw.columns.size(); ++c) {
      const RawColumn& col = raw.columns[c];
      if (col.categorical) {
        std::set<std::string> levels;
        for (std::uint32_t r : rows) levels.insert(col.levels[r]);
        enc.categoricals.push_back({c, {levels.begin(), levels.end()}});
      } else {
        std::vector<double> present;
        for (std::uint32_t r : rows)
          if (!std::isnan(col.numeric[r])) present.push_back(col.numeric[r]);
        double median = 0.0;
        if (!present.empty()) {
          std::sort(present.begin(), present.end());
          const std::size_t mid = present.size() / 2;
          median = present.size() % 2 == 1 ? present[mid]
                                           : 0.5 * (present[mid - 1] + present[mid]);
        }
        enc.numerics.push_back({c, median});
      }
    }
    return enc;
  }

  void encode(const RawTable& raw, std::span<const std::uint32_t> rows, Dataset* out) const {
    out->feature_names.clear();
    std::size_t width = 0;
    for (const auto& num : numerics) {
      out->feature_names.push_back(raw.columns[num.column].name);
      ++width;
    }
    for (const auto& cat : categoricals) {
      for (const auto& level : cat.levels)
        out->feature_names.push_back(raw.columns[cat.column].name + "=" + level);
      width += cat.levels.size();
    }
    out->n_cols = width;
    out->features.assign(rows.size() * width, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::uint32_t r = rows[i];
      double* dst = out->features.data() + i * width;
      std::size_t k = 0;
      for (const auto& num : numerics) {
        const double v = raw.columns[num.column].numeric[r];
        dst[k++] = std::isnan(v) ? num.median : v;
      }
      for (const auto& cat : categoricals) {
        const std::string& level = raw.columns[cat.column].levels[r];
        const auto it = std::lower_bound(cat.levels.begin(), cat.levels.end(), level);
        if (it != cat.levels.end() && *it == level)
          dst[k + static_cast<std::size_t>(it - cat.levels.begin())] = 1.0;
        k += cat.levels.size();  // unseen level leaves the block all-zero
      }
    }
  }
};

Dataset from_raw(std::shared_ptr<const RawTable> raw, std::vector<std::uint32_t> rows,
                 const Encoder& encoder) {
  Dataset out;
  encoder.encode(*raw, rows, &out);
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  for (std::uint32_t r : rows) {
    out.labels.push_back(raw->labels[r]);
    out.groups.push_back(raw->groups[r]);
  }
  out.group_names = raw->group_names;
  out.raw = std::move(raw);
  out.raw_rows = std::move(rows);
  return out;
}

// Largest-remainder apportionment of `count` rows over `fractions`.
std::vector<std::size_t> apportion(std::size_t count, std::span<const double> fractions) {
  std::vector<std::size_t> base(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double quota = fractions[i] * static_cast<double>(count);
    base[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    assigned += base[i];
    remainders.emplace_back(quota - std::floor(quota + 1e-9), i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& lhs, const auto& rhs) {
    if (lhs.first != rhs.first) return lhs.first > rhs.first;
    return lhs.second < rhs.second;
  });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) base[remainders[i % remainders.size()].second]++;
  return base;
}

}  // namespace

std::int64_t Dataset::positives() const {
  std::int64_t n = 0;
  for (std::uint8_t y : labels) n += y;
  return n;
}

double Dataset::prevalence() const {
  return n_rows() == 0 ? 0.0 : static_cast<double>(positives()) / static_cast<double>(n_rows());
}

Dataset make_dataset(std::vector<double> features_row_major, std::size_t n_cols,
                     std::vector<std::uint8_t> labels, std::vector<std::int32_t> groups,
                     std::vector<std::string> group_names,
                     std::vector<std::string> feature_names) {
  Dataset d;
  d.features = std::move(features_row_major);
  d.n_cols = n_cols;
  d.labels = std::move(labels);
  d.groups = std::move(groups);
  if (n_cols != 0 && d.features.size() != d.labels.size() * n_cols)
    throw DataError("make_dataset: feature matrix size mismatch");
  if (d.groups.size() != d.labels.size())
    throw DataError("make_dataset: groups length mismatch");
  if (group_names.empty()) {
    std::int32_t max_group = -1;
    for (std::int32_t g : d.groups) max_group = std::max(max_group, g);
    for (std::int32_t g = 0; g <= max_group; ++g)
      group_names.push_back("group" + std::to_string(g));
  }
  d.group_names = std::move(group_names);
  if (feature_names.empty())
    for (std::size_t c = 0; c < n_cols; ++c) feature_names.push_back("x" + std::to_string(c));
  d.feature_names = std::move(feature_names);
  return d;
}

Dataset subset(const Dataset& data, std::span<const std::uint32_t> rows) {
  Dataset out;
  out.n_cols = data.n_cols;
  out.feature_names = data.feature_names;
  out.group_names = data.group_names;
  out.features.reserve(rows.size() * data.n_cols);
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  for (std::uint32_t r : rows) {
    const auto row = data.row(r);
    out.features.insert(out.features.end(), row.begin(), row.end());
    out.labels.push_back(data.labels[r]);
    out.groups.push_back(data.groups[r]);
  }
  out.raw = data.raw;
  if (data.raw != nullptr) {
    out.raw_rows.reserve(rows.size());
    for (std::uint32_t r : rows) out.raw_rows.push_back(data.raw_rows[r]);
  }
  return out;
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema,
                 std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_csv_text(buf.str(), schema, warnings);
}

Dataset load_csv_text(std::string_view text, const ColumnSchema& schema,
                      std::vector<std::string>* warnings) {
  if (schema.label_column.empty() || schema.sensitive_column.empty())
    throw ConfigError("dataset schema must declare label and sensitive columns");

  std::vector<std::string> lines;
  std::size_t offset = 0;
  while (offset <= text.size()) {
    const std::size_t nl = text.find('\n', offset);
    std::string_view line = text.substr(
        offset, nl == std::string_view::npos ? text.size() - offset : nl - offset);
    offset = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (!(line.empty() && offset > text.size())) lines.emplace_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError("csv: empty file");

  const std::vector<std::string> header = split_csv_row(lines[0], 1);
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index[trim(header[i])] = i;

  auto require_column = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw DataError("csv: missing column '" + name + "'");
    return it->second;
  };
  const std::size_t label_col = require_column(schema.label_column);
  const std::size_t sensitive_col = require_column(schema.sensitive_column);

  const std::size_t n_rows = lines.size() - 1;
  if (n_rows == 0) throw DataError("csv: no data rows");
  std::vector<std::vector<std::string>> cells(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    cells[r] = split_csv_row(lines[r + 1], r + 2);
    if (cells[r].size() != header.size())
      throw DataError("csv line " + std::to_string(r + 2) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells[r].size()));
  }

  // Feature columns: declared or auto-detected.
  std::vector<std::pair<std::size_t, bool>> feature_cols;  // (column, categorical)
  if (schema.feature_columns.empty() && schema.categorical_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_col || c == sensitive_col) continue;
      bool numeric = true;
      double parsed = 0.0;
      for (std::size_t r = 0; r < n_rows && numeric; ++r) {
        const std::string cell = trim(cells[r][c]);
        if (!cell.empty() && !parse_double(cell, &parsed)) numeric = false;
      }
      feature_cols.emplace_back(c, !numeric);
    }
  } else {
    for (const auto& name : schema.feature_columns)
      feature_cols.emplace_back(require_column(name), false);
    for (const auto& name : schema.categorical_columns)
      feature_cols.emplace_back(require_column(name), true);
  }

  auto raw = std::make_shared<RawTable>();
  raw->n_rows = n_rows;

  for (const auto& [c, categorical] : feature_cols) {
    RawColumn col;
    col.name = trim(header[c]);
    col.categorical = categorical;
    if (categorical) {
      col.levels.reserve(n_rows);
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::string cell = trim(cells[r][c]);
        col.levels.push_back(cell.empty() ? kMissingLevel : cell);
      }
    } else {
      col.numeric.reserve(n_rows);
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::string cell = trim(cells[r][c]);
        double v = std::numeric_limits<double>::quiet_NaN();
        if (!cell.empty() && !parse_double(cell, &v))
          throw DataError("csv line " + std::to_string(r + 2) + ": column '" + col.name +
                          "' value '" + cell + "' is not numeric");
        col.numeric.push_back(v);
      }
    }
    raw->columns.push_back(std::move(col));
  }

  raw->labels.reserve(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::string cell = trim(cells[r][label_col]);
    if (cell == "0") {
      raw->labels.push_back(0);
    } else if (cell == "1") {
      raw->labels.push_back(1);
    } else {
      throw DataError("csv line " + std::to_string(r + 2) + ": label '" + cell +
                      "' is not binary (expected 0 or 1)");
    }
  }

  raw->groups.resize(n_rows);
  if (!schema.sensitive_bins.empty()) {
    const auto& edges = schema.sensitive_bins;
    if (!std::is_sorted(edges.begin(), edges.end()))
      throw ConfigError("dataset sensitive_bins must be ascending");
    for (std::size_t b = 0; b <= edges.size(); ++b) {
      std::ostringstream os;
      if (b == 0) os << "<" << edges.front();
      else if (b == edges.size()) os << ">=" << edges.back();
      else os << "[" << edges[b - 1] << "," << edges[b] << ")";
      raw->group_names.push_back(os.str());
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::string cell = trim(cells[r][sensitive_col]);
      double v = 0.0;
      if (!parse_double(cell, &v))
        throw DataError("csv line " + std::to_string(r + 2) + ": sensitive value '" + cell +
                        "' is not numeric but bins were declared");
      std::size_t b = 0;
      while (b < edges.size() && v >= edges[b]) ++b;
      raw->groups[r] = static_cast<std::int32_t>(b);
    }
  } else {
    std::set<std::string> names;
    std::vector<std::string> values(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      std::string cell = trim(cells[r][sensitive_col]);
      if (cell.empty()) cell = kMissingLevel;
      names.insert(cell);
      values[r] = std::move(cell);
    }
    raw->group_names.assign(names.begin(), names.end());
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto it = std::lower_bound(raw->group_names.begin(), raw->group_names.end(), values[r]);
      raw->groups[r] = static_cast<std::int32_t>(it - raw->group_names.begin());
    }
  }
  if (raw->group_names.empty()) throw DataError("csv: sensitive column has no values");

  std::size_t missing = 0;
  for (const auto& col : raw->columns)
    if (!col.categorical)
      for (double v : col.numeric)
        if (std::isnan(v)) ++missing;
  if (missing > 0)
    warn(warnings, "imputed " + std::to_string(missing) + " missing numeric cells with medians");

  std::vector<std::uint32_t> all_rows(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) all_rows[r] = static_cast<std::uint32_t>(r);
  const Encoder encoder = Encoder::fit(*raw, all_rows);
  return from_raw(std::move(raw), std::move(all_rows), encoder);
}

SplitResult split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0))
    throw ConfigError("split fractions must be positive");
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  SplitResult result;

  // (label, group) cells in deterministic order.
  std::map<std::pair<std::uint8_t, std::int32_t>, std::vector<std::uint32_t>> cells;
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    cells[{data.labels[r], data.groups[r]}].push_back(static_cast<std::uint32_t>(r));

  const double fracs[3] = {fractions.train, fractions.val, fractions.test};
  std::vector<std::uint32_t> part_rows[3];
  std::size_t cell_index = 0;
  for (auto& [key, rows] : cells) {
    if (rows.size() < 3) {
      std::ostringstream os;
      os << "stratification cell (label=" << int(key.first) << ", group=" << key.second
         << ") has only " << rows.size() << " rows; falling back to proportional assignment";
      result.warnings.push_back(os.str());
    }
    Rng rng(derive_stream(seed, "split-cell", cell_index++));
    rng.shuffle(rows);
    const auto counts = apportion(rows.size(), fracs);
    std::size_t at = 0;
    for (int part = 0; part < 3; ++part)
      for (std::size_t i = 0; i < counts[part]; ++i) part_rows[part].push_back(rows[at++]);
  }
  for (auto& rows : part_rows) std::sort(rows.begin(), rows.end());

  if (data.raw != nullptr) {
    std::vector<std::uint32_t> raw_parts[3];
    for (int part = 0; part < 3; ++part) {
      raw_parts[part].reserve(part_rows[part].size());
      for (std::uint32_t r : part_rows[part]) raw_parts[part].push_back(data.raw_rows[r]);
    }
    const Encoder encoder = Encoder::fit(*data.raw, raw_parts[0]);
    result.train = from_raw(data.raw, std::move(raw_parts[0]), encoder);
    result.val = from_raw(data.raw, std::move(raw_parts[1]), encoder);
    result.test = from_raw(data.raw, std::move(raw_parts[2]), encoder);
  } else {
    result.train = subset(data, part_rows[0]);
    result.val = subset(data, part_rows[1]);
    result.test = subset(data, part_rows[2]);
  }
  return result;
}

const std::vector<std::uint32_t>& SlicePlan::rows_for_fraction(double fraction) const {
  for (std::size_t i = 0; i < fractions.size(); ++i)
    if (std::abs(fractions[i] - fraction) < 1e-9) return slice_rows[i];
  throw DataError("no training slice for budget fraction " + std::to_string(fraction));
}

SlicePlan nested_slices(const Dataset& train, std::vector<double> fractions, std::uint64_t seed,
                        std::vector<std::string>* warnings) {
  if (fractions.empty()) throw ConfigError("nested_slices: no fractions given");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0.0 || fractions[i] > 1.0 + 1e-12)
      throw ConfigError("nested_slices: fractions must lie in (0, 1]");
    if (i > 0 && fractions[i] <= fractions[i - 1])
      throw ConfigError("nested_slices: fractions must be ascending");
  }

  SlicePlan plan;
  plan.fractions = std::move(fractions);
  plan.assignment.assign(train.n_rows(), -1);
  plan.slice_rows.resize(plan.fractions.size());

  // Per-label permutations; slice i takes each label's first round(p*n) rows,
  // so containment is automatic.
  std::vector<std::uint32_t> by_label[2];
  for (std::size_t r = 0; r < train.n_rows(); ++r)
    by_label[train.labels[r]].push_back(static_cast<std::uint32_t>(r));
  for (int label = 0; label < 2; ++label) {
    Rng rng(derive_stream(seed, "slice-label", static_cast<std::uint64_t>(label)));
    rng.shuffle(by_label[label]);
  }

  for (std::size_t i = 0; i < plan.fractions.size(); ++i) {
    const double p = plan.fractions[i];
    for (int label = 0; label < 2; ++label) {
      const std::size_t n = by_label[label].size();
      if (n == 0) continue;
      auto take = static_cast<std::size_t>(
          std::llround(p * static_cast<double>(n)));
      if (take == 0) {
        std::ostringstream os;
        os << "slice fraction " << p << " would leave label " << label
           << " empty; keeping one row";
        warn(warnings, os.str());
        take = 1;
      }
      take = std::min(take, n);
      for (std::size_t k = 0; k < take; ++k) {
        const std::uint32_t row = by_label[label][k];
        if (plan.assignment[row] < 0) plan.assignment[row] = static_cast<std::int32_t>(i);
      }
    }
    for (std::size_t r = 0; r < train.n_rows(); ++r)
      if (plan.assignment[r] >= 0 && plan.assignment[r] <= static_cast<std::int32_t>(i))
        plan.slice_rows[i].push_back(static_cast<std::uint32_t>(r));
  }
  return plan;
}

Dataset undersample(const Dataset& train, std::optional<double> target, std::uint64_t seed,
                    std::vector<std::string>* warnings) {
  if (!target.has_value()) return train;
  const double t = *target;
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("undersample target must be in (0,1)");

  const std::int64_t n_pos = train.positives();
  const auto n_neg = static_cast<std::int64_t>(train.n_rows()) - n_pos;
  const double prevalence = train.prevalence();
  if (t < prevalence - 1e-12) {
    std::ostringstream os;
    os << "undersample target " << t << " is below the current prevalence " << prevalence
       << "; data unchanged";
    warn(warnings, os.str());
    return train;
  }
  if (n_pos == 0 || std::abs(t - prevalence) <= 1e-12) return train;

  auto keep_neg = static_cast<std::int64_t>(
      std::llround(static_cast<double>(n_pos) * (1.0 - t) / t));
  keep_neg = std::clamp<std::int64_t>(keep_neg, 0, n_neg);

  std::vector<std::uint32_t> negatives;
  for (std::size_t r = 0; r < train.n_rows(); ++r)
    if (train.labels[r] == 0) negatives.push_back(static_cast<std::uint32_t>(r));
  Rng rng(derive_stream(seed, "undersample"));
  rng.shuffle(negatives);
  negatives.resize(static_cast<std::size_t>(keep_neg));

  std::vector<std::uint32_t> keep;
  keep.reserve(static_cast<std::size_t>(n_pos + keep_neg));
  for (std::size_t r = 0; r < train.n_rows(); ++r)
    if (train.labels[r] == 1) keep.push_back(static_cast<std::uint32_t>(r));
  keep.insert(keep.end(), negatives.begin(), negatives.end());
  std::sort(keep.begin(), keep.end());
  return subset(train, keep);
}

}  // namespace fairhpo
