#include "schema.hpp"

#include <cmath>
#include <sstream>

#include "embedded_schema.hpp"

namespace sta::cli {

namespace {

bool has_type(const nlohmann::json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "number") return value.is_number();
  if (type == "integer") {
    if (value.is_number_integer()) return true;
    if (!value.is_number_float()) return false;
    const double v = value.get<double>();
    return std::isfinite(v) && std::floor(v) == v;
  }
  if (type == "null") return value.is_null();
  return false;
}

std::string join_path(const std::string& base, const std::string& key) { return base + "." + key; }

void validate_at(const nlohmann::json& schema, const nlohmann::json& value, const std::string& path,
                 std::vector<SchemaIssue>& issues) {
  if (schema.contains("type")) {
    const auto type = schema.at("type").get<std::string>();
    if (!has_type(value, type)) {
      issues.push_back({path, "expected " + type + ", got " + std::string(value.type_name())});
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& option : schema.at("enum")) found = found || option == value;
    if (!found) issues.push_back({path, "value " + value.dump() + " is not one of " + schema.at("enum").dump()});
  }
  if (value.is_number()) {
    const double v = value.get<double>();
    if (schema.contains("minimum") && v < schema.at("minimum").get<double>()) {
      issues.push_back({path, "must be >= " + schema.at("minimum").dump()});
    }
    if (schema.contains("exclusiveMinimum") && !(v > schema.at("exclusiveMinimum").get<double>())) {
      issues.push_back({path, "must be > " + schema.at("exclusiveMinimum").dump()});
    }
  }
  if (value.is_object()) {
    const auto props = schema.contains("properties") ? schema.at("properties") : nlohmann::json::object();
    if (schema.contains("required")) {
      for (const auto& key : schema.at("required")) {
        const auto name = key.get<std::string>();
        if (!value.contains(name)) issues.push_back({join_path(path, name), "required field is missing"});
      }
    }
    for (const auto& [key, child] : value.items()) {
      if (props.contains(key)) {
        validate_at(props.at(key), child, join_path(path, key), issues);
      } else if (schema.contains("additionalProperties") && schema.at("additionalProperties") == false) {
        issues.push_back({join_path(path, key), "unknown key"});
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      validate_at(schema.at("items"), value.at(i), path + "[" + std::to_string(i) + "]", issues);
    }
  }
  if (schema.contains("oneOf")) {
    std::vector<std::vector<SchemaIssue>> branches;
    std::size_t matches = 0;
    for (const auto& alternative : schema.at("oneOf")) {
      std::vector<SchemaIssue> branch;
      validate_at(alternative, value, path, branch);
      if (branch.empty()) ++matches;
      branches.push_back(std::move(branch));
    }
    if (matches == 1) return;
    if (matches > 1) {
      issues.push_back({path, "matches more than one alternative"});
      return;
    }
    // Report the closest alternative so the message names the offending field.
    std::size_t best = 0;
    for (std::size_t i = 1; i < branches.size(); ++i) {
      if (branches[i].size() < branches[best].size()) best = i;
    }
    std::ostringstream msg;
    msg << "must match exactly one of " << branches.size() << " alternatives";
    issues.push_back({path, msg.str()});
    for (auto& issue : branches[best]) issues.push_back(std::move(issue));
  }
}

}  // namespace

std::vector<SchemaIssue> validate_schema(const nlohmann::json& schema, const nlohmann::json& instance) {
  std::vector<SchemaIssue> issues;
  validate_at(schema, instance, "$", issues);
  return issues;
}

const nlohmann::json& run_config_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(kRunConfigSchema);
  return schema;
}

}  // namespace sta::cli
