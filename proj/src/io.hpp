#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace llmrerank::io {

/// Throws MissingFile when absent, IoError when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

}  // namespace llmrerank::io
