#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccgm/vicinal/vicinal.hpp"

namespace ccgm::losses {

enum class LossVariant { vanilla, hinge };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

// Negative-sample mixing coefficients. lambda_nda is the the vanilla-NDA
// (jigsaw) baseline coefficient used by the ablation harness; it extends the
// dual-NDA loss with a fifth uniformly weighted group and participates in
// the fake-term coefficient the same way lambda1/lambda2 do.
struct DualNdaParams {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda_nda = 0.0;
    LossVariant variant = LossVariant::vanilla;

    double lambda_bar() const { return lambda1 + lambda2 + lambda_nda; }
    void validate() const;
};

struct WeightedTerm {
    double d_out = 0.0;
    double weight = 0.0;
};

// One discriminator batch at the loss level: discriminator outputs plus
// vicinal weights, already grouped. Counts are the number of anchors backing
// each group (defaulting to the group size); weight groups built from full
// vicinities sum to one per anchor.
struct DiscBatch {
    std::vector<WeightedTerm> real_terms;   // weight = W1
    std::vector<WeightedTerm> fake_terms;   // weight = W2
    std::vector<double> type1_outputs;      // uniform 1/N_I weighting
    std::vector<WeightedTerm> type2_terms;  // weight = W3
    std::vector<double> jigsaw_outputs;     // vanilla-NDA baseline group

    std::size_t n_real = 0;
    std::size_t n_fake = 0;
    std::size_t n_type1 = 0;
    std::size_t n_type2 = 0;
    std::size_t n_jigsaw = 0;

    void validate() const;  // nonnegative finite weights, counts cover groups
    std::size_t count_real() const { return n_real ? n_real : real_terms.size(); }
    std::size_t count_fake() const { return n_fake ? n_fake : fake_terms.size(); }
    std::size_t count_type1() const { return n_type1 ? n_type1 : type1_outputs.size(); }
    std::size_t count_type2() const { return n_type2 ? n_type2 : type2_terms.size(); }
    std::size_t count_jigsaw() const { return n_jigsaw ? n_jigsaw : jigsaw_outputs.size(); }
};

struct DiscLossResult {
    double value = 0.0;
    std::vector<double> grad_real;    // dL/d(D output), aligned with the groups
    std::vector<double> grad_fake;
    std::vector<double> grad_type1;
    std::vector<double> grad_type2;
    std::vector<double> grad_jigsaw;
    int saturation_count = 0;  // vanilla outputs clamped away from {0, 1}
};

// Dual-NDA vicinal discriminator loss. Vanilla variant expects post-sigmoid
// outputs in (0,1) and clamps strays to [1e-7, 1-1e-7] (counted, not
// thrown); hinge expects raw scores.
DiscLossResult disc_loss_dual_nda(const DiscBatch& batch, const DualNdaParams& params);

// Plain SVDL (real + fake terms only), kept as an independent reference for
// the lambda1 = lambda2 = 0 reduction identity.
DiscLossResult svdl_disc_loss(const DiscBatch& batch, LossVariant variant);

struct GenLossResult {
    double value = 0.0;
    std::vector<double> grad;  // dL/d(D output on fakes)
    int saturation_count = 0;
};

GenLossResult gen_loss(std::span<const double> d_outputs_on_fakes, LossVariant variant);

// Eq.-8 hard-vicinity weights over the Type II pool labels; delegates to the
// vicinal module.
vicinal::HardWeights w3_weights(std::span<const double> pool_labels, double y_target_perturbed,
                                double kappa);

}  // namespace ccgm::losses
