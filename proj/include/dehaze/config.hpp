#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dhz {

/// Parses `key = value` lines. Blank lines, `#`/`;` comments and `[section]`
/// headers are skipped; keys under a section are prefixed `section.`.
/// Duplicate keys are rejected.
std::map<std::string, std::string> parse_key_values(std::string_view text);

std::vector<int> parse_int_list(const std::string& value);
std::vector<double> parse_double_list(const std::string& value);
std::string trim(std::string_view s);

}  // namespace dhz
