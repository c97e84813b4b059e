#ifndef DRIFTSEL_CONFIG_HPP
#define DRIFTSEL_CONFIG_HPP

// Flat `key = value` configuration files with `#` comments.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "driftsel/error.hpp"
#include "driftsel/format.hpp"
#include "driftsel/ingest.hpp"

namespace driftsel {

class KeyValueConfig {
  public:
    static KeyValueConfig parse(std::istream& in, const std::string& origin = "config") {
        KeyValueConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view v = line;
            if (const auto hash = v.find('#'); hash != std::string_view::npos) {
                v = v.substr(0, hash);
            }
            v = trim(v);
            if (v.empty()) {
                continue;
            }
            const auto eq = v.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            }
            const auto key = trim(v.substr(0, eq));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.set(std::string(key), std::string(trim(v.substr(eq + 1))));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file '" + path + "'");
        }
        return parse(in, path);
    }

    /// Applies a `key=value` override.
    void apply_override(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty()) {
            throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
        }
        set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
    }

    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    template <typename T>
    T get_number(const std::string& key, T fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        const auto v = parse_number<T>(it->second);
        if (!v) {
            throw ConfigError("config key '" + key + "': '" + it->second + "' is not a valid number");
        }
        return *v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw ConfigError("config key '" + key + "': '" + it->second + "' is not a boolean");
    }

    /// Year interval written `first-last`.
    YearRange get_range(const std::string& key, YearRange fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        const std::string_view text = it->second;
        const auto dash = text.find('-', 1);
        const auto first = dash == std::string_view::npos ? std::nullopt : parse_number<int>(trim(text.substr(0, dash)));
        const auto last = dash == std::string_view::npos ? std::nullopt : parse_number<int>(trim(text.substr(dash + 1)));
        if (!first || !last) {
            throw ConfigError("config key '" + key + "': '" + it->second + "' is not a year range 'first-last'");
        }
        return {*first, *last};
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Keys in sorted order, one `key = value` per line.
    void write(std::ostream& os) const {
        for (const auto& [k, v] : values_) {
            os << k << " = " << v << '\n';
        }
    }

  private:
    std::map<std::string, std::string> values_;
};

} // namespace driftsel

#endif
