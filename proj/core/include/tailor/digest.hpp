// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace tailor {

// Lowercase hex SHA-256 of the exact bytes given.
std::string sha256_hex(std::string_view bytes);

// Digest of a file's contents. Throws IoError if the file cannot be read.
std::string sha256_hex_file(const std::filesystem::path& path);

// First 16 hex chars of sha256_hex. Used for stable record identifiers.
std::string digest16(std::string_view bytes);

// First 8 digest bytes as a big-endian u64. Used to derive deterministic
// choices from text.
std::uint64_t digest_u64(std::string_view bytes);

}  // namespace tailor
