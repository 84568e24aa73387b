#include "sigcl/checkpoint.hpp"

#include "sigcl/errors.hpp"
#include "sigcl/io.hpp"

namespace sigcl::checkpoint {

void save(const std::filesystem::path& dir, const std::vector<ModuleRef>& modules,
          const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"version", "1"}, {"dtype", "f32le"}, {"modules", nlohmann::json::array()}};
  for (const auto& m : modules) {
    nlohmann::json entry = {{"name", m.name}, {"spec", m.spec}, {"file", m.name + ".bin"},
                            {"params", nlohmann::json::array()}};
    std::vector<float> blob;
    for (const nn::Param* p : m.params) {
      entry["params"].push_back({{"name", p->name}, {"shape", p->shape}, {"offset", blob.size()},
                                 {"count", p->size()}});
      blob.insert(blob.end(), p->value.begin(), p->value.end());
    }
    io::write_file(dir / (m.name + ".bin"), io::encode_le<float>(blob));
    manifest["modules"].push_back(entry);
  }
  if (!extra.empty()) manifest["extra"] = extra;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw MissingInput("checkpoint directory not found: " + dir.string());
  try {
    auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
    if (manifest.at("version").get<std::string>() != "1")
      throw VersionError("unsupported checkpoint version " + manifest.at("version").dump());
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
}

nlohmann::json load(const std::filesystem::path& dir, const std::vector<ModuleRef>& modules) {
  const auto manifest = read_manifest(dir);
  for (const auto& m : modules) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : manifest.at("modules"))
      if (e.at("name") == m.name) entry = &e;
    if (entry == nullptr) throw ShapeMismatch("checkpoint has no module '" + m.name + "'");
    if (!m.spec.is_null() && entry->at("spec") != m.spec)
      throw ShapeMismatch("module '" + m.name + "': stored spec " + entry->at("spec").dump() +
                          " differs from " + m.spec.dump());
    const auto& params = entry->at("params");
    if (params.size() != m.params.size())
      throw ShapeMismatch("module '" + m.name + "': parameter count differs");
    const auto blob = io::decode_le<float>(io::read_file(dir / entry->at("file").get<std::string>()), m.name);
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::Param* p = m.params[i];
      const auto shape = params[i].at("shape").get<std::vector<std::size_t>>();
      if (params[i].at("name").get<std::string>() != p->name || shape != p->shape)
        throw ShapeMismatch("module '" + m.name + "': parameter " + p->name + " " + shape_string(p->shape) +
                            " vs stored " + params[i].at("name").get<std::string>() + " " + shape_string(shape));
      const auto offset = params[i].at("offset").get<std::size_t>();
      if (offset + p->size() > blob.size())
        throw FormatError("module '" + m.name + "': blob truncated");
      std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(offset), p->size(), p->value.begin());
    }
  }
  return manifest.value("extra", nlohmann::json::object());
}

}  // namespace sigcl::checkpoint
