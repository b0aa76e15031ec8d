#pragma once

#include <span>
#include <string>
#include <vector>

namespace ccgm::vicinal {

// Vicinity hyperparameters: sigma is the std of the label perturbation,
// nu the soft-vicinity decay, kappa the hard-vicinity half-width. The
// weight floor is the threshold under which a soft weight counts as
// outside the vicinity.
struct VicinityParams {
    double sigma = 0.0;
    double nu = 0.0;
    double kappa = 0.0;
    double weight_floor = 1e-3;

    void validate() const;
};

struct VicinityPreset {
    std::string name;
    double sigma;
    double nu;
    double kappa;
};

// Published setups: utkface64, utkface128, steering_angle.
std::span<const VicinityPreset> vicinity_presets();
VicinityParams vicinity_preset(const std::string& name);

// w(y, y') = exp(-nu (y - y')^2)
double soft_weight(double y_i, double y_target, double nu);

// Soft weights normalized to sum to one over the given labels.
std::vector<double> normalized_soft_weights(std::span<const double> labels, double y_target,
                                            double nu);

struct HardWeights {
    std::vector<double> weights;   // 1/m inside the vicinity, 0 outside
    bool empty_vicinity = false;   // no label within kappa of the target
};

HardWeights hard_weights(std::span<const double> labels, double y_target, double kappa);

// Half-width of the soft vicinity: sqrt(-ln(weight_floor) / nu). A label at
// distance < soft_radius has soft weight > weight_floor (strict, matching
// the e^{-nu d^2} > 1e-3 acceptance rule).
double soft_radius(const VicinityParams& params);
double soft_radius(double nu, double weight_floor);

}  // namespace ccgm::vicinal
