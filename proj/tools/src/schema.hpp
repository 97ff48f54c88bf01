#pragma once

// Run-configuration schema and a validator for the subset of JSON Schema it
// uses: type, enum, numeric bounds, items, minItems, required, properties,
// additionalProperties and local $ref.

#include <string>
#include <vector>

#include <json.hpp>

namespace conftree::cli {

struct SchemaViolation {
    std::string pointer;
    std::string message;
};

const nlohmann::json& run_config_schema();

std::vector<SchemaViolation> validate_against(const nlohmann::json& schema, const nlohmann::json& document);

std::string json_pointer_token(const std::string& key);

}  // namespace conftree::cli
