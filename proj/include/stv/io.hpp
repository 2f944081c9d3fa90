#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace stv {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Single on-disk container used by checkpoints, activation banks and
// intervention plans: magic, length-prefixed JSON manifest, then a raw
// little-endian f64 payload.
struct PayloadFile {
    nlohmann::json manifest;
    std::vector<double> payload;
};

void write_payload_file(const std::filesystem::path& path, const nlohmann::json& manifest,
                        const std::vector<double>& payload);
PayloadFile read_payload_file(const std::filesystem::path& path);

// FNV-1a over raw bytes; used for config and artifact fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace stv
