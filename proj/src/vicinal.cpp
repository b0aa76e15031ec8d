#include "ccgm/vicinal/vicinal.hpp"

#include <array>
#include <cmath>

#include "ccgm/core/errors.hpp"

namespace ccgm::vicinal {

void VicinityParams::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("vicinity sigma must be > 0");
    if (!(nu > 0.0)) throw ConfigError("vicinity nu must be > 0");
    if (!(kappa > 0.0)) throw ConfigError("vicinity kappa must be > 0");
    if (!(weight_floor > 0.0 && weight_floor < 1.0))
        throw ConfigError("vicinity weight_floor must lie in (0,1)");
}

namespace {
const std::array<VicinityPreset, 3> kPresets{{
    {"utkface64", 0.041, 3600.0, 0.017},
    {"utkface128", 0.041, 900.0, 0.033},
    {"steering_angle", 0.029, 1000.438, 0.032},
}};
}

std::span<const VicinityPreset> vicinity_presets() { return kPresets; }

VicinityParams vicinity_preset(const std::string& name) {
    for (const auto& p : kPresets) {
        if (p.name == name) {
            VicinityParams out;
            out.sigma = p.sigma;
            out.nu = p.nu;
            out.kappa = p.kappa;
            return out;
        }
    }
    throw ConfigError("unknown vicinity preset: " + name +
                      " (known: utkface64, utkface128, steering_angle)");
}

double soft_weight(double y_i, double y_target, double nu) {
    const double d = y_i - y_target;
    return std::exp(-nu * d * d);
}

std::vector<double> normalized_soft_weights(std::span<const double> labels, double y_target,
                                            double nu) {
    if (labels.empty()) throw DomainError("normalized_soft_weights: empty label list");
    std::vector<double> w(labels.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        w[i] = soft_weight(labels[i], y_target, nu);
        sum += w[i];
    }
    for (auto& x : w) x /= sum;
    return w;
}

HardWeights hard_weights(std::span<const double> labels, double y_target, double kappa) {
    if (labels.empty()) throw DomainError("hard_weights: empty label list");
    if (!(kappa > 0.0)) throw DomainError("hard_weights: kappa must be > 0");
    HardWeights out;
    out.weights.assign(labels.size(), 0.0);
    std::size_t m = 0;
    for (double y : labels)
        if (std::abs(y - y_target) <= kappa) ++m;
    if (m == 0) {
        out.empty_vicinity = true;
        return out;
    }
    const double w = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (std::abs(labels[i] - y_target) <= kappa) out.weights[i] = w;
    return out;
}

double soft_radius(double nu, double weight_floor) {
    if (!(nu > 0.0)) throw DomainError("soft_radius: nu must be > 0");
    if (!(weight_floor > 0.0 && weight_floor <= 1.0))
        throw DomainError("soft_radius: weight_floor must lie in (0,1]");
    return std::sqrt(-std::log(weight_floor) / nu);
}

double soft_radius(const VicinityParams& params) {
    return soft_radius(params.nu, params.weight_floor);
}

}  // namespace ccgm::vicinal
