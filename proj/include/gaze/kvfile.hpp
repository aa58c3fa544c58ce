#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gaze {

/// Flat `key = value` text records. Blank lines and `#` comments are skipped;
/// later duplicates overwrite earlier ones.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);

double kv_number(const KeyValues& values, const std::string& key);

std::string_view trim(std::string_view s);

/// Splits a comma-separated row and trims each field.
std::vector<std::string> split_fields(std::string_view line, char sep = ',');

double parse_double(std::string_view s);
long long parse_integer(std::string_view s);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Fixed "%.*f" formatting so text outputs are byte-stable.
std::string format_fixed(double value, int digits = 6);

/// Shortest text that parses back to the same double.
std::string format_exact(double value);

}  // namespace gaze
