#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairhpo/rng.hpp"

namespace fairhpo {

// Column roles for CSV ingestion. When both feature lists are empty every
// column other than label/sensitive becomes a feature, with numeric vs
// categorical detected from the cells. Numeric sensitive attributes can be
// binned into groups by declaring ascending bin edges.
struct ColumnSchema {
  std::string label_column;
  std::string sensitive_column;
  std::vector<std::string> feature_columns;      // declared numeric features
  std::vector<std::string> categorical_columns;  // declared categorical features
  std::vector<double> sensitive_bins;            // optional ascending edges
};

// Raw parsed CSV kept behind the encoded matrix so split() can re-fit the
// one-hot/imputation encoder on its training partition.
struct RawColumn {
  std::string name;
  bool categorical = false;
  std::vector<double> numeric;       // NaN marks a missing cell
  std::vector<std::string> levels;   // per-row category ("missing" for empty cells)
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> groups;
  std::vector<std::string> group_names;
  std::size_t n_rows = 0;
};

struct Dataset {
  std::vector<double> features;  // row-major, n_rows() x n_cols
  std::size_t n_cols = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> groups;
  std::vector<std::string> group_names;
  std::vector<std::string> feature_names;

  std::shared_ptr<const RawTable> raw;     // present when CSV-backed
  std::vector<std::uint32_t> raw_rows;     // rows of `raw` backing this view

  std::size_t n_rows() const { return labels.size(); }
  std::span<const double> row(std::size_t r) const {
    return {features.data() + r * n_cols, n_cols};
  }
  std::int64_t positives() const;
  double prevalence() const;
};

Dataset make_dataset(std::vector<double> features_row_major, std::size_t n_cols,
                     std::vector<std::uint8_t> labels, std::vector<std::int32_t> groups,
                     std::vector<std::string> group_names = {},
                     std::vector<std::string> feature_names = {});

// Row subset preserving the parent's encoding. `rows` must be valid indices.
Dataset subset(const Dataset& data, std::span<const std::uint32_t> rows);

// Loads a headered CSV, one-hot encodes categoricals, median-imputes missing
// numerics. Parse problems are reported with their 1-based line number.
Dataset load_csv(const std::string& path, const ColumnSchema& schema,
                 std::vector<std::string>* warnings = nullptr);
Dataset load_csv_text(std::string_view text, const ColumnSchema& schema,
                      std::vector<std::string>* warnings = nullptr);

struct SplitFractions {
  double train = 0.6, val = 0.2, test = 0.2;
};

struct SplitResult {
  Dataset train, val, test;
  std::vector<std::string> warnings;
};

// Disjoint, exhaustive, stratified by (label x group); deterministic per
// seed. For CSV-backed data the feature encoder is re-fit on the training
// partition and applied to all three parts (unseen levels encode to zeros).
SplitResult split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed);

// Nested stratified training slices: the slice at fraction p is contained in
// every slice at fraction q > p and preserves the class ratio.
struct SlicePlan {
  std::vector<double> fractions;                       // ascending
  std::vector<std::int32_t> assignment;                // per row: smallest slice index, -1 = none
  std::vector<std::vector<std::uint32_t>> slice_rows;  // ascending row ids per fraction

  const std::vector<std::uint32_t>& rows_for_fraction(double fraction) const;
};

SlicePlan nested_slices(const Dataset& train, std::vector<double> fractions, std::uint64_t seed,
                        std::vector<std::string>* warnings = nullptr);

// Randomly discards negatives until the positive prevalence reaches `target`
// (within one row). Positives are never dropped; a target at or below the
// current prevalence leaves the data unchanged (with a warning when below).
Dataset undersample(const Dataset& train, std::optional<double> target, std::uint64_t seed,
                    std::vector<std::string>* warnings = nullptr);

}  // namespace fairhpo
