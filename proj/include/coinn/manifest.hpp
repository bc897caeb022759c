#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/numio.hpp"
#include "coinn/rng.hpp"
#include "coinn/version.hpp"

namespace coinn {

/// Content digests for a list of files, keyed by path as given.
inline nlohmann::json file_digests(const std::vector<std::string>& paths) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : paths) out[p] = fnv1a64_hex(read_file(p));
  return out;
}

/// Run manifest: everything needed to re-run a command bit-identically —
/// tool and format versions, the generator name, the effective configuration,
/// and digests of the files read and written. Deliberately carries no
/// timestamps so manifests of identical runs are themselves identical.
inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& effective_config,
                                    const std::vector<std::string>& input_paths,
                                    const std::vector<std::string>& output_paths,
                                    const nlohmann::json& extra = nlohmann::json::object()) {
  return nlohmann::json{{"tool", kToolName},
                        {"tool_version", kToolVersion},
                        {"format_version", kFormatVersion},
                        {"generator", rng::kGeneratorName},
                        {"command", command},
                        {"config", effective_config},
                        {"inputs", file_digests(input_paths)},
                        {"outputs", file_digests(output_paths)},
                        {"extra", extra}};
}

inline void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  write_file(path, manifest.dump(2) + "\n");
}

}  // namespace coinn
