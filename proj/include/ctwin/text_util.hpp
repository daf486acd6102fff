#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ctwin {

std::vector<std::string> split_whitespace(std::string_view line);
std::vector<std::string> split(std::string_view text, char sep);

bool try_parse_double(std::string_view text, double& out);
/// Throws DataError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);

/// Shortest representation that reads back to the same double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace ctwin
