#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

// Versioned binary checkpoint container shared by every trained model:
//
//   magic[8] | u32 version | u32 header_len | header (JSON, UTF-8)
//   | u64 param_count | float32[param_count] | sha256 hex[64] over all prior bytes
//
// Integers and floats are little-endian.
namespace polypgen::io {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
    nlohmann::json header;
    std::vector<float> parameters;
    std::string digest;
};

void write_container(const std::filesystem::path& path, std::string_view magic, const nlohmann::json& header,
                     std::span<const float> parameters);

/// Throws CorruptCheckpoint on truncation, bad magic or digest mismatch and
/// VersionMismatch on an unknown version.
Container read_container(const std::filesystem::path& path, std::string_view magic);

/// Digest of an in-memory container, identical to the one written to disk.
std::string container_digest(std::string_view magic, const nlohmann::json& header, std::span<const float> parameters);

}  // namespace polypgen::io
