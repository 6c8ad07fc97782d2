#include "fairhpo/searchspace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fairhpo/errors.hpp"

namespace fairhpo {

namespace {

std::string kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::ContinuousUniform: return "uniform";
    case ParamKind::ContinuousLogUniform: return "log-uniform";
    case ParamKind::IntegerUniform: return "integer";
    case ParamKind::Categorical: return "categorical";
  }
  return "?";
}

void validate_param(const ParamSpec& p, const std::string& where) {
  const std::string at = where + "." + p.name;
  switch (p.kind) {
    case ParamKind::ContinuousUniform:
    case ParamKind::ContinuousLogUniform:
      if (!std::isfinite(p.low) || !std::isfinite(p.high))
        throw ConfigError(at + ": bounds must be finite");
      if (!(p.low < p.high)) throw ConfigError(at + ": bounds must satisfy low < high");
      if (p.kind == ParamKind::ContinuousLogUniform && !(p.low > 0.0))
        throw ConfigError(at + ": log-uniform lower bound must be > 0");
      break;
    case ParamKind::IntegerUniform:
      if (!(p.ilow < p.ihigh)) throw ConfigError(at + ": bounds must satisfy low < high");
      break;
    case ParamKind::Categorical: {
      if (p.categories.empty()) throw ConfigError(at + ": category list must be non-empty");
      std::set<std::string> seen;
      for (const auto& c : p.categories)
        if (!seen.insert(c).second)
          throw ConfigError(at + ": duplicate category '" + c + "'");
      break;
    }
  }
}

bool value_matches(const ParamSpec& p, const ParamValue& v, std::string* why) {
  switch (p.kind) {
    case ParamKind::ContinuousUniform:
    case ParamKind::ContinuousLogUniform: {
      const double* d = std::get_if<double>(&v);
      if (d == nullptr) {
        *why = "expected a real value";
        return false;
      }
      if (*d < p.low || *d > p.high) {
        std::ostringstream os;
        os << "value " << *d << " outside [" << p.low << ", " << p.high << "]";
        *why = os.str();
        return false;
      }
      return true;
    }
    case ParamKind::IntegerUniform: {
      const std::int64_t* i = std::get_if<std::int64_t>(&v);
      if (i == nullptr) {
        *why = "expected an integer value";
        return false;
      }
      if (*i < p.ilow || *i > p.ihigh) {
        std::ostringstream os;
        os << "value " << *i << " outside [" << p.ilow << ", " << p.ihigh << "]";
        *why = os.str();
        return false;
      }
      return true;
    }
    case ParamKind::Categorical: {
      const std::string* s = std::get_if<std::string>(&v);
      if (s == nullptr) {
        *why = "expected a categorical value";
        return false;
      }
      if (std::find(p.categories.begin(), p.categories.end(), *s) == p.categories.end()) {
        *why = "value '" + *s + "' is not a declared category";
        return false;
      }
      return true;
    }
  }
  *why = "unknown kind";
  return false;
}

ParamValue draw(const ParamSpec& p, Rng& rng) {
  switch (p.kind) {
    case ParamKind::ContinuousUniform:
      return rng.uniform(p.low, p.high);
    case ParamKind::ContinuousLogUniform:
      return rng.log_uniform(p.low, p.high);
    case ParamKind::IntegerUniform:
      return rng.uniform_int(p.ilow, p.ihigh);
    case ParamKind::Categorical:
      return p.categories[rng.bounded(p.categories.size())];
  }
  return 0.0;
}

ParamSpec parse_param(const toml::Value& tbl, const std::string& where) {
  ParamSpec p;
  p.name = toml::get_string(tbl, "name", where);
  const std::string at = where + "." + p.name;
  const std::string kind = toml::get_string(tbl, "kind", at);
  if (kind == "uniform") {
    p.kind = ParamKind::ContinuousUniform;
  } else if (kind == "log-uniform") {
    p.kind = ParamKind::ContinuousLogUniform;
  } else if (kind == "integer") {
    p.kind = ParamKind::IntegerUniform;
  } else if (kind == "categorical") {
    p.kind = ParamKind::Categorical;
  } else {
    throw ConfigError(at + ": unknown kind '" + kind + "'");
  }
  if (p.kind == ParamKind::Categorical) {
    p.categories = toml::get_string_array(tbl, "categories", at);
  } else if (p.kind == ParamKind::IntegerUniform) {
    p.ilow = toml::get_int(tbl, "low", at);
    p.ihigh = toml::get_int(tbl, "high", at);
  } else {
    p.low = toml::get_double(tbl, "low", at);
    p.high = toml::get_double(tbl, "high", at);
  }
  validate_param(p, where);
  return p;
}

}  // namespace

ParamSpec ParamSpec::continuous(std::string name, double low, double high) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::ContinuousUniform;
  p.low = low;
  p.high = high;
  return p;
}

ParamSpec ParamSpec::log_continuous(std::string name, double low, double high) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::ContinuousLogUniform;
  p.low = low;
  p.high = high;
  return p;
}

ParamSpec ParamSpec::integer(std::string name, std::int64_t low, std::int64_t high) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::IntegerUniform;
  p.ilow = low;
  p.ihigh = high;
  return p;
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> categories) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::Categorical;
  p.categories = std::move(categories);
  return p;
}

std::string param_value_to_string(const ParamValue& v) {
  if (const double* d = std::get_if<double>(&v)) {
    std::ostringstream os;
    os.precision(17);
    os << *d;
    return os.str();
  }
  if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

const ParamValue* Configuration::find(const std::string& name) const {
  auto it = assignments.find(name);
  return it == assignments.end() ? nullptr : &it->second;
}

double Configuration::number(const std::string& name) const {
  const ParamValue* v = find(name);
  if (v == nullptr) throw TunerError("configuration missing parameter '" + name + "'");
  if (const double* d = std::get_if<double>(v)) return *d;
  if (const std::int64_t* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
  throw TunerError("parameter '" + name + "' is not numeric");
}

std::int64_t Configuration::integer(const std::string& name) const {
  const ParamValue* v = find(name);
  if (v == nullptr) throw TunerError("configuration missing parameter '" + name + "'");
  if (const std::int64_t* i = std::get_if<std::int64_t>(v)) return *i;
  throw TunerError("parameter '" + name + "' is not an integer");
}

const std::string& Configuration::category(const std::string& name) const {
  const ParamValue* v = find(name);
  if (v == nullptr) throw TunerError("configuration missing parameter '" + name + "'");
  if (const std::string* s = std::get_if<std::string>(v)) return *s;
  throw TunerError("parameter '" + name + "' is not categorical");
}

const std::vector<ParamSpec>& SearchSpace::branch(const std::string& category) const {
  auto it = conditional_subspaces.find(category);
  if (it == conditional_subspaces.end())
    throw ConfigError("space.branch: no subspace for selector category '" + category + "'");
  return it->second;
}

void validate_space(const SearchSpace& space) {
  if (space.selector.kind != ParamKind::Categorical)
    throw ConfigError("space.selector." + space.selector.name + ": selector must be categorical");
  validate_param(space.selector, "space.selector");
  for (const auto& p : space.root_params) validate_param(p, "space.root");

  for (const auto& cat : space.selector.categories) {
    if (space.conditional_subspaces.find(cat) == space.conditional_subspaces.end())
      throw ConfigError("space.branch: selector category '" + cat + "' has no subspace entry");
  }
  for (const auto& [cat, params] : space.conditional_subspaces) {
    if (std::find(space.selector.categories.begin(), space.selector.categories.end(), cat) ==
        space.selector.categories.end())
      throw ConfigError("space.branch." + cat + ": not a selector category");
    for (const auto& p : params) validate_param(p, "space.branch." + cat);
  }

  // Name uniqueness across root + selector + each single branch.
  std::set<std::string> base;
  for (const auto& p : space.root_params)
    if (!base.insert(p.name).second)
      throw ConfigError("space.root." + p.name + ": duplicate parameter name");
  if (!base.insert(space.selector.name).second)
    throw ConfigError("space.selector." + space.selector.name + ": duplicate parameter name");
  for (const auto& [cat, params] : space.conditional_subspaces) {
    std::set<std::string> names = base;
    for (const auto& p : params)
      if (!names.insert(p.name).second)
        throw ConfigError("space.branch." + cat + "." + p.name +
                          ": name collides with another active parameter");
  }
}

SearchSpace parse_space(const toml::Value& space_section) {
  SearchSpace space;
  const toml::Value& sel = toml::require(space_section, "selector", "space");
  space.selector.name = toml::get_string(sel, "name", "space.selector");
  space.selector.kind = ParamKind::Categorical;
  space.selector.categories = toml::get_string_array(sel, "categories", "space.selector");

  if (const toml::Value* root = space_section.find("root")) {
    if (root->kind != toml::Value::Kind::TableArray)
      throw ConfigError("space.root must be declared with [[space.root]] entries");
    for (const auto& entry : root->array_v)
      space.root_params.push_back(parse_param(entry, "space.root"));
  }

  for (const auto& cat : space.selector.categories) space.conditional_subspaces[cat] = {};
  if (const toml::Value* branches = space_section.find("branch")) {
    for (const auto& [cat, arr] : branches->table_v) {
      if (arr.kind != toml::Value::Kind::TableArray)
        throw ConfigError("space.branch." + cat + " must use [[space.branch." + cat + "]] entries");
      auto& params = space.conditional_subspaces[cat];
      for (const auto& entry : arr.array_v)
        params.push_back(parse_param(entry, "space.branch." + cat));
    }
  }
  validate_space(space);
  return space;
}

SearchSpace parse_space_text(std::string_view toml_text) {
  toml::Value doc = toml::parse(toml_text);
  const toml::Value* section = doc.find("space");
  if (section == nullptr) throw ConfigError("document has no [space] section");
  return parse_space(*section);
}

Configuration sample_configuration(const SearchSpace& space, Rng& rng) {
  Configuration config;
  for (const auto& p : space.root_params) config.assignments[p.name] = draw(p, rng);
  const std::string category =
      space.selector.categories[rng.bounded(space.selector.categories.size())];
  config.assignments[space.selector.name] = category;
  for (const auto& p : space.branch(category)) config.assignments[p.name] = draw(p, rng);
  return config;
}

std::vector<std::string> validate_configuration(const SearchSpace& space,
                                                const Configuration& config) {
  std::vector<std::string> violations;
  std::string why;

  std::map<std::string, const ParamSpec*> active;
  for (const auto& p : space.root_params) active[p.name] = &p;
  active[space.selector.name] = &space.selector;

  const ParamValue* sel = config.find(space.selector.name);
  const std::string* category = nullptr;
  if (sel == nullptr) {
    violations.push_back("missing selector '" + space.selector.name + "'");
  } else if (!value_matches(space.selector, *sel, &why)) {
    violations.push_back(space.selector.name + ": " + why);
  } else {
    category = std::get_if<std::string>(sel);
  }
  if (category != nullptr)
    for (const auto& p : space.branch(*category)) active[p.name] = &p;

  for (const auto& [name, spec] : active) {
    if (name == space.selector.name) continue;  // handled above
    const ParamValue* v = config.find(name);
    if (v == nullptr) {
      violations.push_back("missing assignment for '" + name + "'");
    } else if (!value_matches(*spec, *v, &why)) {
      violations.push_back(name + ": " + why);
    }
  }

  for (const auto& [name, value] : config.assignments) {
    (void)value;
    if (active.find(name) != active.end()) continue;
    bool inactive_branch = false;
    for (const auto& [cat, params] : space.conditional_subspaces) {
      if (category != nullptr && cat == *category) continue;
      for (const auto& p : params)
        if (p.name == name) inactive_branch = true;
    }
    violations.push_back(inactive_branch
                             ? "assignment for inactive branch parameter '" + name + "'"
                             : "assignment for unknown parameter '" + name + "'");
  }
  return violations;
}

SearchSpace builtin_space(bool with_undersampling) {
  SearchSpace space;
  if (with_undersampling)
    space.root_params.push_back(
        ParamSpec::categorical("undersampling", {"0.20", "0.10", "0.05", "none"}));
  space.selector = ParamSpec::categorical("model", {"logreg", "tree"});
  // learning_rate * l2_penalty stays below 2, the stability bound of
  // full-batch descent on the quadratic penalty term
  space.conditional_subspaces["logreg"] = {
      ParamSpec::log_continuous("learning_rate", 1e-3, 1.0),
      ParamSpec::log_continuous("l2_penalty", 1e-8, 1.0),
      ParamSpec::integer("epochs", 10, 500),
      ParamSpec::categorical("class_weighting", {"none", "balanced"}),
  };
  space.conditional_subspaces["tree"] = {
      ParamSpec::integer("max_depth", 1, 12),
      ParamSpec::integer("min_samples_leaf", 1, 100),
      ParamSpec::categorical("split_criterion", {"gini", "entropy"}),
  };
  validate_space(space);
  return space;
}

}  // namespace fairhpo
