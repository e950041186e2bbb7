#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace kcmp {

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace kcmp
