#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rrk {

/// Whole-file read; throws IoError.
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace rrk
