#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace abc {

std::array<std::uint8_t, 32> sha256_bytes(const void* data, std::size_t len);
std::string sha256_hex(const std::string& data);
// Content digest of a file; raises BAD_ARGUMENT when the file cannot be read.
std::string sha256_file_hex(const std::string& path);

}  // namespace abc
