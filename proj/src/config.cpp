#include "wearpm/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wearpm/error.hpp"

namespace wearpm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

[[noreturn]] void syntax_error(const std::string& origin, std::size_t line, const std::string& what) {
    throw Error(ErrorKind::Config, origin + ":" + std::to_string(line) + ": " + what);
}

// Parses the value part of a line; `rest` receives anything after it.
ConfigValue parse_toml_value(std::string_view text, std::string_view& rest, const std::string& origin,
                             std::size_t line) {
    if (text.empty()) syntax_error(origin, line, "missing value");
    if (text.front() == '"') {
        std::string out;
        std::size_t i = 1;
        for (; i < text.size() && text[i] != '"'; ++i) {
            if (text[i] != '\\') {
                out.push_back(text[i]);
                continue;
            }
            if (++i >= text.size()) break;
            switch (text[i]) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: syntax_error(origin, line, std::string("unsupported escape \\") + text[i]);
            }
        }
        if (i >= text.size()) syntax_error(origin, line, "unterminated string");
        rest = text.substr(i + 1);
        return out;
    }
    if (text.front() == '\'') {
        auto close = text.find('\'', 1);
        if (close == std::string_view::npos) syntax_error(origin, line, "unterminated string");
        rest = text.substr(close + 1);
        return std::string(text.substr(1, close - 1));
    }
    if (text.front() == '[' || text.front() == '{') syntax_error(origin, line, "arrays and inline tables are not supported");

    auto end = text.find('#');
    auto token = trim(text.substr(0, end));
    rest = end == std::string_view::npos ? std::string_view{} : text.substr(end);
    if (token == "true") return true;
    if (token == "false") return false;

    std::string digits;
    for (char c : token) {
        if (c != '_') digits.push_back(c);
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ec == std::errc() && p == digits.data() + digits.size()) return i;
    double d = 0.0;
    auto [q, ec2] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (ec2 == std::errc() && q == digits.data() + digits.size()) return d;
    syntax_error(origin, line, "cannot parse value '" + std::string(token) + "'");
}

const char* type_name(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "number";
        default: return "string";
    }
}

[[noreturn]] void wrong_type(std::string_view key, const char* expected, const ConfigValue& got) {
    throw Error(ErrorKind::Config,
                "key '" + std::string(key) + "': expected " + expected + ", got " + type_name(got));
}

}  // namespace

FlatConfig FlatConfig::parse_toml(std::string_view text, const std::string& origin) {
    FlatConfig cfg;
    cfg.origin_ = origin;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') syntax_error(origin, line_no, "tables are not supported in a flat config");

        auto eq = line.find('=');
        if (eq == std::string_view::npos) syntax_error(origin, line_no, "expected key = value");
        auto key = trim(line.substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
        if (key.empty()) syntax_error(origin, line_no, "empty key");
        for (char c : key) {
            if (!is_key_char(c)) syntax_error(origin, line_no, "invalid key '" + std::string(key) + "'");
        }

        std::string_view rest;
        auto value = parse_toml_value(trim(line.substr(eq + 1)), rest, origin, line_no);
        rest = trim(rest);
        if (!rest.empty() && rest.front() != '#') syntax_error(origin, line_no, "trailing characters after value");
        if (cfg.contains(key)) syntax_error(origin, line_no, "duplicate key '" + std::string(key) + "'");
        cfg.values_.emplace(std::string(key), std::move(value));
    }
    return cfg;
}

FlatConfig FlatConfig::parse_json(std::string_view text, const std::string& origin) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, origin + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::Config, origin + ": top level must be an object");

    FlatConfig cfg;
    cfg.origin_ = origin;
    for (const auto& [key, value] : doc.items()) {
        if (value.is_boolean()) {
            cfg.values_.emplace(key, value.get<bool>());
        } else if (value.is_number_integer()) {
            cfg.values_.emplace(key, value.get<std::int64_t>());
        } else if (value.is_number()) {
            cfg.values_.emplace(key, value.get<double>());
        } else if (value.is_string()) {
            cfg.values_.emplace(key, value.get<std::string>());
        } else {
            throw Error(ErrorKind::Config, origin + ": key '" + key + "' must be a scalar");
        }
    }
    return cfg;
}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.extension() == ".json") return parse_json(buf.str(), path.string());
    return parse_toml(buf.str(), path.string());
}

void FlatConfig::merge_from(const FlatConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> FlatConfig::string(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* s = std::get_if<std::string>(&it->second)) return *s;
    wrong_type(key, "string", it->second);
}

std::optional<std::int64_t> FlatConfig::integer(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    wrong_type(key, "integer", it->second);
}

std::optional<double> FlatConfig::number(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* d = std::get_if<double>(&it->second)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    wrong_type(key, "number", it->second);
}

std::optional<bool> FlatConfig::boolean(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* b = std::get_if<bool>(&it->second)) return *b;
    wrong_type(key, "boolean", it->second);
}

}  // namespace wearpm
