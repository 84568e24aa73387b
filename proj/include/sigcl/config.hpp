#pragma once

// Flat key = value text form of RunConfig. Lines starting with '#' are
// comments; unknown keys and malformed values throw InvalidArgument naming
// the key.

#include <map>
#include <string>

#include <json.hpp>

#include "sigcl/pipeline.hpp"

namespace sigcl::config {

void set_value(pipeline::RunConfig& cfg, const std::string& key, const std::string& value);
// "key=value"
void apply_override(pipeline::RunConfig& cfg, const std::string& assignment);
pipeline::RunConfig parse_text(const std::string& text, pipeline::RunConfig base = {});

// Every key with its current value, in a stable order.
std::map<std::string, std::string> to_map(const pipeline::RunConfig& cfg);
std::string to_text(const pipeline::RunConfig& cfg);
nlohmann::json to_json(const pipeline::RunConfig& cfg);

}  // namespace sigcl::config
