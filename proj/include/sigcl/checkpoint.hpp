#pragma once

// Checkpoint directory: manifest.json (module names, specs, parameter names
// and shapes) plus one little-endian f32 blob per module.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigcl/nn/layers.hpp"

namespace sigcl::checkpoint {

struct ModuleRef {
  std::string name;
  nlohmann::json spec;
  std::vector<nn::Param*> params;
};

void save(const std::filesystem::path& dir, const std::vector<ModuleRef>& modules,
          const nlohmann::json& extra = nlohmann::json::object());

// Restores every listed module. Throws ShapeMismatch when a module is missing
// or its spec, parameter names or shapes disagree with the manifest.
nlohmann::json load(const std::filesystem::path& dir, const std::vector<ModuleRef>& modules);

nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace sigcl::checkpoint
