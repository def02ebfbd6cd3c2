#pragma once

#include <cstdint>
#include <string>

namespace fewshot {

// Hex-encoded SHA-256 digests for manifest artifact hashes.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

}  // namespace fewshot
