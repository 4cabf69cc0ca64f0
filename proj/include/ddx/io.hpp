#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ddx {

std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view s);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace ddx
