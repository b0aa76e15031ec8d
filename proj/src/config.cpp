#include "ccgm/cli/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ccgm/core/errors.hpp"

namespace ccgm::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

constexpr std::array kKnownKeys = {
    "run.seed",
    "data.kind", "data.n", "data.resolution", "data.imbalance", "data.distinct",
    "data.folder", "data.labels_file", "data.channels",
    "vicinity.preset", "vicinity.sigma", "vicinity.nu", "vicinity.kappa",
    "vicinity.weight_floor",
    "train.steps", "train.disc_batch", "train.gen_batch", "train.disc_updates_per_step",
    "train.lr", "train.beta1", "train.beta2", "train.loss_variant",
    "train.lambda1", "train.lambda2", "train.lambda_nda", "train.q1",
    "train.nda_start_step", "train.augment", "train.jigsaw_grid",
    "train.checkpoint_every", "train.seed",
    "model.z_dim", "model.label_embed_dim", "model.g_channels", "model.d_channels",
    "model.spectral_norm",
    "niqe.patch_size", "niqe.sharpness_quantile",
    "negatives.mode", "negatives.q2", "negatives.per_label", "negatives.m_total",
    "negatives.seed",
    "eval.centers", "eval.center_min", "eval.center_max", "eval.radius",
    "eval.n_per_center", "eval.min_per_window", "eval.epochs", "eval.bins",
    "eval.seed",
    "sample.n_per_label", "sample.seed",
    "ablate.axis", "ablate.q1_grid", "ablate.q2_grid", "ablate.lambda_grid",
    "ablate.combo_grid",
};

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        c.values_[key] = value;
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: '" + it->second + "'");
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc() || p != it->second.data() + it->second.size())
        throw ConfigError("config key " + key + " is not an integer: '" + it->second + "'");
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "on") return true;
    if (it->second == "false" || it->second == "0" || it->second == "off") return false;
    throw ConfigError("config key " + key + " is not a boolean: '" + it->second + "'");
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " has a non-numeric element: '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + " lists no values");
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key,
                                                 const std::vector<std::string>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::string> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw ConfigError("config key " + key + " lists no values");
    return out;
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value: '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    if (key.empty()) throw ConfigError("override has an empty key: '" + assignment + "'");
    values_[key] = value;
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

void Config::validate_keys() const {
    for (const auto& [k, _] : values_) {
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), k) == kKnownKeys.end())
            throw ConfigError("unknown config key: " + k);
    }
}

}  // namespace ccgm::cli
