#pragma once

#include <json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace linkagent {

using Json = nlohmann::json;

/// Parses JSON text; syntax errors become ConfigError carrying line and column.
Json parse_json_text(std::string_view text, std::string_view what);

/// Reads and parses a JSON file. Missing or unreadable files raise ConfigError.
Json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temporary sibling then renames, so readers never see a partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Rejects keys outside `allowed`. `context` prefixes the error's field name.
void require_known_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                        const std::string& context);

/// Fetches a required member; ConfigError naming `context.key` if absent.
const Json& require_member(const Json& obj, std::string_view key, const std::string& context);

/// Formats a double with round-trip precision ("%.17g"), locale-independent.
std::string format_double(double v);

} // namespace linkagent
