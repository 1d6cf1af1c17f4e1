#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace truex {

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Substream seed for one named consumer of a run seed. Depends only on
// (run_seed, name), so adding or reordering stages leaves others unchanged.
uint64_t derive_seed(uint64_t run_seed, std::string_view name);

}  // namespace truex
