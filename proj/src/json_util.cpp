#include "linkagent/json_util.hpp"

#include "linkagent/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace linkagent {

namespace {

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte)
{
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace

Json parse_json_text(std::string_view text, std::string_view what)
{
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        const auto [line, col] = line_and_column(text, e.byte);
        std::ostringstream msg;
        msg << what << ": parse error at line " << line << ", column " << col << ": "
            << e.what();
        throw ConfigError(msg.str());
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json_file(const std::filesystem::path& path)
{
    return parse_json_text(read_text_file(path), path.string());
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void require_known_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                        const std::string& context)
{
    if (!obj.is_object()) {
        throw ConfigError(context + ": expected an object", context);
    }
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            const std::string field = context.empty() ? key : context + "." + key;
            throw ConfigError("unknown field '" + field + "'", field);
        }
    }
}

const Json& require_member(const Json& obj, std::string_view key, const std::string& context)
{
    const std::string field = context.empty() ? std::string(key) : context + "." + std::string(key);
    if (!obj.is_object()) {
        throw ConfigError(context + ": expected an object", context);
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError("missing field '" + field + "'", field);
    }
    return *it;
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace linkagent
