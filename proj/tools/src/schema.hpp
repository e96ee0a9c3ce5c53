#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace sta::cli {

/// One schema violation, located by a JSON path such as "$.trap.f0_hz".
struct SchemaIssue {
  std::string path;
  std::string message;
};

/// Validates an instance against the subset of JSON Schema used by the run
/// configuration: type, properties, required, additionalProperties (false),
/// enum, minimum, exclusiveMinimum, items and oneOf.
std::vector<SchemaIssue> validate_schema(const nlohmann::json& schema, const nlohmann::json& instance);

/// The embedded run-configuration schema, parsed once.
const nlohmann::json& run_config_schema();

}  // namespace sta::cli
