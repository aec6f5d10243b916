#include "quim/config.hpp"

#include "quim/error.hpp"
#include "quim/jsonl.hpp"
#include "quim/text.hpp"

namespace quim {

namespace {

// Offset of the first '#' outside a quoted string, or npos.
std::size_t comment_start(std::string_view s) {
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (quote == '"' && c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return i;
        }
    }
    return std::string_view::npos;
}

// Rewrites TOML literal strings as JSON strings so the value parses as JSON.
std::string literal_to_json(std::string_view v) {
    std::string out;
    char quote = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const char c = v[i];
        if (quote == '"') {
            out += c;
            if (c == '\\' && i + 1 < v.size()) out += v[++i];
            else if (c == '"') quote = 0;
        } else if (quote == '\'') {
            if (c == '\'') {
                out += '"';
                quote = 0;
            } else if (c == '"' || c == '\\') {
                out += '\\';
                out += c;
            } else {
                out += c;
            }
        } else if (c == '\'') {
            out += '"';
            quote = '\'';
        } else {
            if (c == '"') quote = '"';
            out += c;
        }
    }
    return out;
}

bool scalar_or_array(const nlohmann::json& j) {
    if (j.is_string() || j.is_number() || j.is_boolean()) return true;
    if (!j.is_array()) return false;
    for (const auto& e : j) {
        if (!(e.is_string() || e.is_number() || e.is_boolean())) return false;
    }
    return true;
}

}  // namespace

std::map<std::string, nlohmann::json> parse_flat_config(std::string_view text) {
    std::map<std::string, nlohmann::json> out;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        line = trim(line.substr(0, comment_start(line)));
        if (line.empty()) continue;
        const auto where = "config line " + std::to_string(line_no);
        if (line.front() == '[') throw Error(Errc::ConfigError, where + ": tables are not supported");
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(Errc::ConfigError, where + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw Error(Errc::ConfigError, where + ": expected key = value");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(literal_to_json(value));
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::ConfigError, where + ": cannot parse value for '" + key + "'");
        }
        if (!scalar_or_array(j)) throw Error(Errc::ConfigError, where + ": unsupported value for '" + key + "'");
        if (!out.emplace(key, std::move(j)).second) throw Error(Errc::ConfigError, where + ": duplicate key '" + key + "'");
    }
    return out;
}

std::map<std::string, nlohmann::json> read_flat_config(const std::filesystem::path& path) {
    return parse_flat_config(read_file(path));
}

}  // namespace quim
