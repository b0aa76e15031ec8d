#include "ccgm/losses/losses.hpp"

#include <cmath>

#include "ccgm/core/errors.hpp"

namespace ccgm::losses {

LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "vanilla") return LossVariant::vanilla;
    if (s == "hinge") return LossVariant::hinge;
    throw ConfigError("unknown loss variant: " + s);
}

std::string to_string(LossVariant v) { return v == LossVariant::vanilla ? "vanilla" : "hinge"; }

void DualNdaParams::validate() const {
    if (lambda1 < 0.0 || lambda1 > 1.0) throw ConfigError("lambda1 must lie in [0,1]");
    if (lambda2 < 0.0 || lambda2 > 1.0) throw ConfigError("lambda2 must lie in [0,1]");
    if (lambda_nda < 0.0 || lambda_nda > 1.0) throw ConfigError("lambda_nda must lie in [0,1]");
    if (lambda_bar() > 1.0)
        throw ConfigError("lambda1 + lambda2 (+ lambda_nda) must not exceed 1");
}

void DiscBatch::validate() const {
    auto check = [](const std::vector<WeightedTerm>& terms, const char* name) {
        for (const auto& t : terms) {
            if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
                throw DomainError(std::string("disc batch: negative or non-finite weight in ") +
                                  name);
            if (!std::isfinite(t.d_out))
                throw DomainError(std::string("disc batch: non-finite output in ") + name);
        }
    };
    check(real_terms, "real_terms");
    check(fake_terms, "fake_terms");
    check(type2_terms, "type2_terms");
    for (double v : type1_outputs)
        if (!std::isfinite(v)) throw DomainError("disc batch: non-finite type1 output");
    for (double v : jigsaw_outputs)
        if (!std::isfinite(v)) throw DomainError("disc batch: non-finite jigsaw output");
}

namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

struct Clamped {
    double value;
    bool clamped;
};

Clamped clamp_unit(double d) {
    if (d < kClampLo) return {kClampLo, true};
    if (d > kClampHi) return {kClampHi, true};
    return {d, false};
}

// -coef * w * log(D): value and d/dD. Clamped outputs carry zero gradient.
void add_log_d(double coef, double w, double d, double& value, double& grad, int& saturations) {
    const auto [cd, was_clamped] = clamp_unit(d);
    if (was_clamped) ++saturations;
    value += -coef * w * std::log(cd);
    grad = was_clamped ? 0.0 : -coef * w / cd;
}

// -coef * w * log(1 - D)
void add_log_one_minus_d(double coef, double w, double d, double& value, double& grad,
                         int& saturations) {
    const auto [cd, was_clamped] = clamp_unit(d);
    if (was_clamped) ++saturations;
    value += -coef * w * std::log(1.0 - cd);
    grad = was_clamped ? 0.0 : coef * w / (1.0 - cd);
}

// -coef * w * min(0, -1 + D)   (hinge, real side)
void add_hinge_real(double coef, double w, double d, double& value, double& grad) {
    if (d < 1.0) {
        value += -coef * w * (-1.0 + d);
        grad = -coef * w;
    } else {
        grad = 0.0;
    }
}

// -coef * w * min(0, -1 - D)   (hinge, fake/negative side)
void add_hinge_fake(double coef, double w, double d, double& value, double& grad) {
    if (d > -1.0) {
        value += -coef * w * (-1.0 - d);
        grad = coef * w;
    } else {
        grad = 0.0;
    }
}

DiscLossResult disc_loss_impl(const DiscBatch& batch, double lambda1, double lambda2,
                              double lambda_nda, LossVariant variant) {
    batch.validate();
    DiscLossResult r;
    r.grad_real.assign(batch.real_terms.size(), 0.0);
    r.grad_fake.assign(batch.fake_terms.size(), 0.0);
    r.grad_type1.assign(batch.type1_outputs.size(), 0.0);
    r.grad_type2.assign(batch.type2_terms.size(), 0.0);
    r.grad_jigsaw.assign(batch.jigsaw_outputs.size(), 0.0);

    const double lambda_bar = lambda1 + lambda2 + lambda_nda;
    const bool vanilla = variant == LossVariant::vanilla;

    if (!batch.real_terms.empty()) {
        const double coef = 1.0 / static_cast<double>(batch.count_real());
        for (std::size_t i = 0; i < batch.real_terms.size(); ++i) {
            const auto& t = batch.real_terms[i];
            if (vanilla)
                add_log_d(coef, t.weight, t.d_out, r.value, r.grad_real[i], r.saturation_count);
            else
                add_hinge_real(coef, t.weight, t.d_out, r.value, r.grad_real[i]);
        }
    }
    if (!batch.fake_terms.empty()) {
        const double coef = (1.0 - lambda_bar) / static_cast<double>(batch.count_fake());
        for (std::size_t i = 0; i < batch.fake_terms.size(); ++i) {
            const auto& t = batch.fake_terms[i];
            if (vanilla)
                add_log_one_minus_d(coef, t.weight, t.d_out, r.value, r.grad_fake[i],
                                    r.saturation_count);
            else
                add_hinge_fake(coef, t.weight, t.d_out, r.value, r.grad_fake[i]);
        }
    }
    if (!batch.type1_outputs.empty() && lambda1 != 0.0) {
        const double coef = lambda1 / static_cast<double>(batch.count_type1());
        for (std::size_t i = 0; i < batch.type1_outputs.size(); ++i) {
            if (vanilla)
                add_log_one_minus_d(coef, 1.0, batch.type1_outputs[i], r.value, r.grad_type1[i],
                                    r.saturation_count);
            else
                add_hinge_fake(coef, 1.0, batch.type1_outputs[i], r.value, r.grad_type1[i]);
        }
    }
    if (!batch.type2_terms.empty() && lambda2 != 0.0) {
        const double coef = lambda2 / static_cast<double>(batch.count_type2());
        for (std::size_t i = 0; i < batch.type2_terms.size(); ++i) {
            const auto& t = batch.type2_terms[i];
            if (vanilla)
                add_log_one_minus_d(coef, t.weight, t.d_out, r.value, r.grad_type2[i],
                                    r.saturation_count);
            else
                add_hinge_fake(coef, t.weight, t.d_out, r.value, r.grad_type2[i]);
        }
    }
    if (!batch.jigsaw_outputs.empty() && lambda_nda != 0.0) {
        const double coef = lambda_nda / static_cast<double>(batch.count_jigsaw());
        for (std::size_t i = 0; i < batch.jigsaw_outputs.size(); ++i) {
            if (vanilla)
                add_log_one_minus_d(coef, 1.0, batch.jigsaw_outputs[i], r.value, r.grad_jigsaw[i],
                                    r.saturation_count);
            else
                add_hinge_fake(coef, 1.0, batch.jigsaw_outputs[i], r.value, r.grad_jigsaw[i]);
        }
    }
    return r;
}

}  // namespace

DiscLossResult disc_loss_dual_nda(const DiscBatch& batch, const DualNdaParams& params) {
    params.validate();
    return disc_loss_impl(batch, params.lambda1, params.lambda2, params.lambda_nda,
                          params.variant);
}

DiscLossResult svdl_disc_loss(const DiscBatch& batch, LossVariant variant) {
    DiscBatch stripped;
    stripped.real_terms = batch.real_terms;
    stripped.fake_terms = batch.fake_terms;
    stripped.n_real = batch.n_real;
    stripped.n_fake = batch.n_fake;
    return disc_loss_impl(stripped, 0.0, 0.0, 0.0, variant);
}

GenLossResult gen_loss(std::span<const double> d_outputs_on_fakes, LossVariant variant) {
    if (d_outputs_on_fakes.empty()) throw DomainError("gen_loss: empty output list");
    GenLossResult r;
    r.grad.assign(d_outputs_on_fakes.size(), 0.0);
    const double coef = 1.0 / static_cast<double>(d_outputs_on_fakes.size());
    for (std::size_t i = 0; i < d_outputs_on_fakes.size(); ++i) {
        const double d = d_outputs_on_fakes[i];
        if (!std::isfinite(d)) throw DomainError("gen_loss: non-finite output");
        if (variant == LossVariant::vanilla) {
            add_log_d(coef, 1.0, d, r.value, r.grad[i], r.saturation_count);
        } else {
            r.value += -coef * d;
            r.grad[i] = -coef;
        }
    }
    return r;
}

vicinal::HardWeights w3_weights(std::span<const double> pool_labels, double y_target_perturbed,
                                double kappa) {
    return vicinal::hard_weights(pool_labels, y_target_perturbed, kappa);
}

}  // namespace ccgm::losses
