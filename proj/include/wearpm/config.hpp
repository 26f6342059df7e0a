#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace wearpm {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;

// Flat key/value document. Accepts a TOML subset (bare or dotted keys,
// strings, integers, floats, booleans, comments; no tables or arrays) or a
// JSON object of scalars.
class FlatConfig {
public:
    static FlatConfig parse_toml(std::string_view text, const std::string& origin = "<toml>");
    static FlatConfig parse_json(std::string_view text, const std::string& origin = "<json>");
    // Picks the syntax from the extension (.json, otherwise TOML).
    static FlatConfig load(const std::filesystem::path& path);

    bool contains(std::string_view key) const { return values_.find(key) != values_.end(); }
    void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
    void merge_from(const FlatConfig& other);

    // Typed lookups; a present key of the wrong type throws Error(Config)
    // naming the key.
    std::optional<std::string> string(std::string_view key) const;
    std::optional<std::int64_t> integer(std::string_view key) const;
    std::optional<double> number(std::string_view key) const;
    std::optional<bool> boolean(std::string_view key) const;

    const std::map<std::string, ConfigValue, std::less<>>& entries() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, ConfigValue, std::less<>> values_;
    std::string origin_;
};

}  // namespace wearpm
