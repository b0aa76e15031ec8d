#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ccgm::cli {

// Plain-text configuration: one `dotted.key = value` per line, '#' comments.
// Keys are validated against the known-key registry when an experiment is
// assembled; unknown keys are a usage error naming the key.
class Config {
public:
    Config() = default;

    static Config parse_file(const std::filesystem::path& path);
    static Config parse_text(const std::string& text, const std::string& origin = "<inline>");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

    // `--set key=value` override.
    void apply_override(const std::string& assignment);

    // Canonical snapshot (sorted keys).
    std::string dump() const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // Throws ConfigError naming the first key outside the known registry.
    void validate_keys() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace ccgm::cli
