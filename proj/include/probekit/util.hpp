#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);

// Offset of the first byte that breaks UTF-8 well-formedness, or npos.
std::size_t find_invalid_utf8(std::string_view s) noexcept;

// Reads the next line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

// Shortest round-trippable decimal for double output in tables.
std::string format_double(double value, int significant_digits = 9);

std::string utc_timestamp();

}  // namespace probekit
