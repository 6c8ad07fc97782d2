#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fairhpo/rng.hpp"
#include "fairhpo/toml.hpp"

namespace fairhpo {

// Hierarchical (one-level conditional) hyperparameter space: a set of root
// parameters that are always active, one categorical selector naming the
// model type, and per-selector-category branches of extra parameters.

enum class ParamKind { ContinuousUniform, ContinuousLogUniform, IntegerUniform, Categorical };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::ContinuousUniform;
  double low = 0.0;                     // numeric kinds
  double high = 0.0;
  std::int64_t ilow = 0;                // integer kind (inclusive on both ends)
  std::int64_t ihigh = 0;
  std::vector<std::string> categories;  // categorical kind

  static ParamSpec continuous(std::string name, double low, double high);
  static ParamSpec log_continuous(std::string name, double low, double high);
  static ParamSpec integer(std::string name, std::int64_t low, std::int64_t high);
  static ParamSpec categorical(std::string name, std::vector<std::string> categories);
};

using ParamValue = std::variant<double, std::int64_t, std::string>;

std::string param_value_to_string(const ParamValue& v);

struct Configuration {
  std::int64_t id = -1;  // assigned by the tuner at sampling time
  std::map<std::string, ParamValue> assignments;

  const ParamValue* find(const std::string& name) const;
  double number(const std::string& name) const;     // double or integer assignment
  std::int64_t integer(const std::string& name) const;
  const std::string& category(const std::string& name) const;
};

struct SearchSpace {
  std::vector<ParamSpec> root_params;
  ParamSpec selector;  // categorical
  std::map<std::string, std::vector<ParamSpec>> conditional_subspaces;

  const std::vector<ParamSpec>& branch(const std::string& category) const;
};

// Validates every ParamSpec invariant plus cross-space rules (unique names
// within root + selector + any single branch; every selector category has a
// branch entry). Throws ConfigError naming the offending field.
void validate_space(const SearchSpace& space);

// Parses the [space] section layout:
//   [space.selector]   name, categories
//   [[space.root]]     name, kind, bounds or categories
//   [[space.branch.<category>]]  per-branch parameters
// `kind` is one of "uniform", "log-uniform", "integer", "categorical".
SearchSpace parse_space(const toml::Value& space_section);
SearchSpace parse_space_text(std::string_view toml_text);  // standalone [space] document

// Uniform hierarchical draw: root params, then the selector (uniform over
// categories), then the active branch. Returned Configuration has id = -1.
Configuration sample_configuration(const SearchSpace& space, Rng& rng);

// Empty result means `config` satisfies every Configuration invariant.
std::vector<std::string> validate_configuration(const SearchSpace& space,
                                                const Configuration& config);

// The model space the built-in trainers understand; used by example configs
// and tests. Includes the undersampling root parameter when requested.
SearchSpace builtin_space(bool with_undersampling = true);

}  // namespace fairhpo
