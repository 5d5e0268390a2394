#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hrpm/mlp.hpp"

namespace hrpm {

inline constexpr const char* kCheckpointFormat = "hrpm.mlp";
inline constexpr int kCheckpointVersion = 1;

/// Layer sizes, activations and row-major parameter arrays.
nlohmann::json to_json(const Mlp& net);
/// Throws ShapeError on inconsistent shapes, DataError on a foreign format or version.
Mlp mlp_from_json(const nlohmann::json& j);

void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace hrpm
