#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lesionkit {

inline constexpr const char* kToolVersion = "1.0.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

//! `{ "tool": "lesionkit", "version": ..., "seed": ..., "inputs": {name: sha256} }`.
//! Inputs are keyed by file name so reports do not depend on directory layout.
nlohmann::json provenance(std::uint64_t seed,
                          const std::vector<std::filesystem::path>& inputs);

//! Pretty-printed JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

} // namespace lesionkit
