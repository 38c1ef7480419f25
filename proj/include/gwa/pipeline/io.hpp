#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gwa::io {

// Writes to "<path>.tmp" and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string> split_fields(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

// Strict parsers; the whole field must be consumed. Throw ParseError.
double parse_double(std::string_view field, const std::string& source, std::size_t line);
long long parse_int(std::string_view field, const std::string& source, std::size_t line);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace gwa::io
