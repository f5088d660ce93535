#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mvee::detail {

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace mvee::detail
