#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bcos/common.hpp"

namespace bcos {

enum class ConfigSource { Default, File, Flag };

inline const char* to_string(ConfigSource s) {
    switch (s) {
        case ConfigSource::Default: return "default";
        case ConfigSource::File: return "file";
        case ConfigSource::Flag: return "flag";
    }
    return "?";
}

/// Flat key=value overlay file: one pair per line, '#' comments and blank
/// lines ignored, values taken verbatim after the first '='.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                              ": expected key=value");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                              ": empty key");
        }
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

/// One resolved option with its provenance. Precedence: flag > file > default.
struct ResolvedOption {
    std::string key;
    std::string value;
    ConfigSource source = ConfigSource::Default;
};

/// Merges explicit flags, an optional overlay file, and defaults, recording
/// where each value came from. Unknown keys in the file are rejected so typos
/// fail loudly.
class ConfigResolver {
public:
    ConfigResolver() = default;

    explicit ConfigResolver(std::map<std::string, std::string> file_values)
        : file_(std::move(file_values)) {}

    /// `flag_set` is whether the option was given on the command line;
    /// `current` its (possibly default) value. Returns the resolved value.
    std::string resolve(const std::string& key, bool flag_set, const std::string& current) {
        known_.push_back(key);
        ResolvedOption opt{key, current, ConfigSource::Default};
        if (auto it = file_.find(key); it != file_.end()) {
            opt.value = it->second;
            opt.source = ConfigSource::File;
        }
        if (flag_set) {
            opt.value = current;
            opt.source = ConfigSource::Flag;
        }
        resolved_.push_back(opt);
        return opt.value;
    }

    /// Reject overlay keys that no option consumed.
    void check_unknown_keys() const {
        for (const auto& [key, value] : file_) {
            bool known = false;
            for (const std::string& k : known_) {
                if (k == key) {
                    known = true;
                    break;
                }
            }
            if (!known) throw ConfigError("unknown config key '" + key + "'");
        }
    }

    const std::vector<ResolvedOption>& resolved() const { return resolved_; }

private:
    std::map<std::string, std::string> file_;
    std::vector<std::string> known_;
    std::vector<ResolvedOption> resolved_;
};

}  // namespace bcos
