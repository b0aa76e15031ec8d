#pragma once

// Template method bodies for models.hpp; include that header instead.

#include <cmath>

#include "ccgm/models/models.hpp"

namespace ccgm::models {

inline void GeneratorSpec::validate() const {
    if (resolution != 16 && resolution != 32 && resolution != 64)
        throw ConfigError("generator resolution must be one of {16, 32, 64}");
    if (z_dim == 0 || label_embed_dim == 0 || base_channels < 8)
        throw ConfigError("generator spec has degenerate dimensions");
    if (out_channels != 1 && out_channels != 3)
        throw ConfigError("generator out_channels must be 1 or 3");
}

inline std::size_t GeneratorSpec::upsample_stages() const {
    std::size_t n = 0;
    for (std::size_t side = 4; side < resolution; side *= 2) ++n;
    return n;
}

inline void DiscriminatorSpec::validate() const {
    if (resolution != 16 && resolution != 32 && resolution != 64)
        throw ConfigError("discriminator resolution must be one of {16, 32, 64}");
    if (base_channels < 8 || label_embed_dim == 0)
        throw ConfigError("discriminator spec has degenerate dimensions");
    if (in_channels != 1 && in_channels != 3)
        throw ConfigError("discriminator in_channels must be 1 or 3");
}

inline std::size_t DiscriminatorSpec::down_stages() const {
    std::size_t n = 0;
    for (std::size_t side = resolution; side > 4; side /= 2) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// Generator

template <typename S>
Generator<S>::Generator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng = Rng::derive(seed, {0x67656e65726174ULL});
    emb_ = LabelMlp<S>("g.emb", spec_.label_embed_dim, rng);
    fc_ = nn::Linear<S>("g.fc", spec_.z_dim, spec_.base_channels * 16, rng);
    std::size_t ch = spec_.base_channels;
    const std::size_t n_up = spec_.upsample_stages();
    for (std::size_t i = 0; i < n_up; ++i) {
        const std::size_t next = std::max<std::size_t>(ch / 2, 8);
        Block b;
        const std::string name = "g.b" + std::to_string(i);
        b.inject = nn::Linear<S>(name + ".inject", spec_.label_embed_dim, ch, rng);
        b.conv = nn::Conv2d<S>(name + ".conv", ch, next, 3, 1, 1, rng);
        b.bn = nn::BatchNorm2d<S>(name + ".bn", next);
        b.in_channels = ch;
        blocks_.push_back(std::move(b));
        ch = next;
    }
    out_conv_ = nn::Conv2d<S>("g.out", ch, spec_.out_channels, 3, 1, 1, rng);
}

template <typename S>
TensorT<S> Generator<S>::forward(const TensorT<S>& z, const TensorT<S>& labels,
                                     bool training) {
    const std::size_t n = z.dim(0);
    last_batch_ = n;
    TensorT<S> e = emb_.forward(labels);
    TensorT<S> x =
        fc_.forward(z).reshaped({n, spec_.base_channels, 4, 4});
    for (auto& b : blocks_) {
        TensorT<S> inj = b.inject.forward(e);
        const std::size_t ch = b.in_channels, hw = x.dim(2) * x.dim(3);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t c = 0; c < ch; ++c) {
                const S add = inj[s * ch + c];
                S* p = x.data() + (s * ch + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) p[i] += add;
            }
        x = b.up.forward(x);
        x = b.conv.forward(x);
        x = b.bn.forward(x, training);
        x = b.act.forward(x);
    }
    x = out_conv_.forward(x);
    return out_act_.forward(x);
}

template <typename S>
void Generator<S>::backward(const TensorT<S>& d_images) {
    const std::size_t n = last_batch_;
    TensorT<S> d = out_act_.backward(d_images);
    d = out_conv_.backward(d, true);
    TensorT<S> d_e({n, spec_.label_embed_dim});
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        auto& b = *it;
        d = b.act.backward(d);
        d = b.bn.backward(d);
        d = b.conv.backward(d, true);
        d = b.up.backward(d);
        const std::size_t ch = b.in_channels, hw = d.dim(2) * d.dim(3);
        TensorT<S> d_inj({n, ch});
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t c = 0; c < ch; ++c) {
                S acc = S(0);
                const S* p = d.data() + (s * ch + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) acc += p[i];
                d_inj[s * ch + c] = acc;
            }
        TensorT<S> d_e_part = b.inject.backward(d_inj);
        for (std::size_t i = 0; i < d_e.numel(); ++i) d_e[i] += d_e_part[i];
    }
    fc_.backward(d.reshaped({n, spec_.base_channels * 16}));
    emb_.backward(d_e);
}

template <typename S>
std::vector<nn::Param<S>*> Generator<S>::trainable_params() {
    std::vector<nn::Param<S>*> out;
    emb_.collect(out);
    fc_.collect(out);
    for (auto& b : blocks_) {
        b.inject.collect(out);
        b.conv.collect(out);
        b.bn.collect(out);
    }
    out_conv_.collect(out);
    return out;
}

template <typename S>
std::size_t Generator<S>::param_count() {
    std::size_t n = 0;
    for (auto* p : trainable_params()) n += p->value.numel();
    return n;
}

namespace detail {

template <typename S>
void save_param(persist::ArtifactWriter& w, const std::string& prefix, const nn::Param<S>& p) {
    if constexpr (std::is_same_v<S, float>) {
        w.add_f32(prefix + p.name, p.value.flat(), p.value.shape());
    } else {
        w.add_f64(prefix + p.name, p.value.flat(), p.value.shape());
    }
}

template <typename S>
void load_param(const persist::ArtifactReader& r, const std::string& prefix, nn::Param<S>& p) {
    std::vector<S> data;
    if constexpr (std::is_same_v<S, float>) {
        data = r.f32(prefix + p.name);
    } else {
        data = r.f64(prefix + p.name);
    }
    if (data.size() != p.value.numel())
        throw FormatError("checkpoint tensor size mismatch for " + p.name);
    std::copy(data.begin(), data.end(), p.value.flat().begin());
}

}  // namespace detail

template <typename S>
void Generator<S>::save_state(persist::ArtifactWriter& w, const std::string& prefix) const {
    auto* self = const_cast<Generator<S>*>(this);
    for (auto* p : self->trainable_params()) detail::save_param(w, prefix, *p);
    std::size_t i = 0;
    for (auto& b : self->blocks_) {
        const std::string name = prefix + "g.b" + std::to_string(i++) + ".bn";
        w.add_f64(name + ".running_mean", b.bn.running_mean(), {b.bn.running_mean().size()});
        w.add_f64(name + ".running_var", b.bn.running_var(), {b.bn.running_var().size()});
    }
}

template <typename S>
void Generator<S>::load_state(const persist::ArtifactReader& r, const std::string& prefix) {
    for (auto* p : trainable_params()) detail::load_param(r, prefix, *p);
    std::size_t i = 0;
    for (auto& b : blocks_) {
        const std::string name = prefix + "g.b" + std::to_string(i++) + ".bn";
        b.bn.running_mean() = r.f64(name + ".running_mean");
        b.bn.running_var() = r.f64(name + ".running_var");
    }
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename S>
Discriminator<S>::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng = Rng::derive(seed, {0x64697363ULL});
    emb_ = LabelMlp<S>("d.emb", spec_.label_embed_dim, rng);
    std::size_t ch_in = spec_.in_channels;
    std::size_t ch_out = spec_.base_channels;
    const std::size_t downs = spec_.down_stages();
    for (std::size_t i = 0; i < downs; ++i) {
        Block b;
        b.conv = nn::Conv2d<S>("d.b" + std::to_string(i) + ".conv", ch_in, ch_out, 4, 2, 1, rng);
        blocks_.push_back(std::move(b));
        ch_in = ch_out;
        ch_out = std::min<std::size_t>(ch_out * 2, spec_.base_channels * 8);
    }
    {
        Block b;
        b.conv = nn::Conv2d<S>("d.b" + std::to_string(downs) + ".conv", ch_in, ch_in, 3, 1, 1, rng);
        blocks_.push_back(std::move(b));
    }
    const std::size_t feat_dim = ch_in;
    head_ = nn::Linear<S>("d.head", feat_dim, 1, rng);
    proj_ = nn::Linear<S>("d.proj", spec_.label_embed_dim, feat_dim, rng, /*bias=*/false);
    if (spec_.spectral_norm) {
        for (auto& b : blocks_) {
            b.sn = std::make_unique<nn::SpectralNorm<S>>(
                b.conv.weight(), b.conv.weight().value.dim(0), rng);
        }
        head_sn_ = std::make_unique<nn::SpectralNorm<S>>(head_.weight(), 1, rng);
        proj_sn_ = std::make_unique<nn::SpectralNorm<S>>(proj_.weight(), feat_dim, rng);
    }
}

template <typename S>
void Discriminator<S>::refresh_spectral() {
    if (!spec_.spectral_norm) return;
    for (auto& b : blocks_) b.sn->refresh(b.conv.weight());
    head_sn_->refresh(head_.weight());
    proj_sn_->refresh(proj_.weight());
}

template <typename S>
void Discriminator<S>::collect_spectral_grads() {
    if (!spec_.spectral_norm) return;
    for (auto& b : blocks_) b.sn->collect_grad(b.conv.weight());
    head_sn_->collect_grad(head_.weight());
    proj_sn_->collect_grad(proj_.weight());
}

template <typename S>
std::vector<double> Discriminator<S>::effective_sigmas() {
    std::vector<double> out;
    if (!spec_.spectral_norm) return out;
    for (auto& b : blocks_) out.push_back(b.sn->measure_effective_sigma());
    out.push_back(head_sn_->measure_effective_sigma());
    out.push_back(proj_sn_->measure_effective_sigma());
    return out;
}

template <typename S>
std::vector<double> Discriminator<S>::forward(const TensorT<S>& images,
                                              const TensorT<S>& labels) {
    refresh_spectral();
    const std::size_t n = images.dim(0);
    TensorT<S> x = images;
    for (auto& b : blocks_) {
        x = b.conv.forward(x);
        x = b.act.forward(x);
    }
    const std::size_t F = x.dim(1);
    feat_h_ = x.dim(2);
    feat_w_ = x.dim(3);
    feat_ = TensorT<S>({n, F});
    const std::size_t hw = feat_h_ * feat_w_;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < F; ++c) {
            S acc = S(0);
            const S* p = x.data() + (s * F + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += p[i];
            feat_[s * F + c] = acc;
        }

    TensorT<S> e = emb_.forward(labels);
    proj_emb_ = proj_.forward(e);
    TensorT<S> s1 = head_.forward(feat_);

    std::vector<double> scores(n);
    for (std::size_t s = 0; s < n; ++s) {
        double dot = 0.0;
        for (std::size_t c = 0; c < F; ++c)
            dot += static_cast<double>(feat_[s * F + c]) * static_cast<double>(proj_emb_[s * F + c]);
        scores[s] = static_cast<double>(s1[s]) + dot;
        if (!std::isfinite(scores[s])) throw TrainingError("discriminator produced non-finite score");
    }
    return scores;
}

template <typename S>
TensorT<S> Discriminator<S>::backward(std::span<const double> d_scores, bool want_input_grad) {
    const std::size_t n = feat_.dim(0);
    const std::size_t F = feat_.dim(1);
    if (d_scores.size() != n) throw DomainError("discriminator backward: batch size mismatch");

    TensorT<S> dy1({n, 1});
    for (std::size_t s = 0; s < n; ++s) dy1[s] = static_cast<S>(d_scores[s]);
    TensorT<S> df = head_.backward(dy1);

    TensorT<S> dpe({n, F});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < F; ++c) {
            const auto g = static_cast<S>(d_scores[s]);
            dpe[s * F + c] = g * feat_[s * F + c];
            df[s * F + c] += g * proj_emb_[s * F + c];
        }
    emb_.backward(proj_.backward(dpe));

    // sum-pool backward: broadcast df over the spatial grid
    const std::size_t hw = feat_h_ * feat_w_;
    TensorT<S> d({n, F, feat_h_, feat_w_});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < F; ++c) {
            const S g = df[s * F + c];
            S* p = d.data() + (s * F + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) p[i] = g;
        }

    for (std::size_t i = blocks_.size(); i-- > 0;) {
        auto& b = blocks_[i];
        d = b.act.backward(d);
        const bool need = want_input_grad || i > 0;
        d = b.conv.backward(d, need);
    }
    return d;
}

template <typename S>
std::vector<nn::Param<S>*> Discriminator<S>::trainable_params() {
    std::vector<nn::Param<S>*> out;
    emb_.collect(out);
    for (auto& b : blocks_) {
        if (b.sn) {
            out.push_back(&b.sn->raw());
            out.push_back(&b.conv.bias());
        } else {
            b.conv.collect(out);
        }
    }
    if (head_sn_) {
        out.push_back(&head_sn_->raw());
        out.push_back(&head_.bias());
        out.push_back(&proj_sn_->raw());
    } else {
        head_.collect(out);
        proj_.collect(out);
    }
    return out;
}

template <typename S>
std::size_t Discriminator<S>::param_count() {
    std::size_t n = 0;
    for (auto* p : trainable_params()) n += p->value.numel();
    return n;
}

template <typename S>
void Discriminator<S>::save_state(persist::ArtifactWriter& w, const std::string& prefix) const {
    auto* self = const_cast<Discriminator<S>*>(this);
    for (auto* p : self->trainable_params()) detail::save_param(w, prefix, *p);
    if (spec_.spectral_norm) {
        auto save_u = [&](const std::string& name, nn::SpectralNorm<S>& sn) {
            const auto& u = sn.u_state();
            w.add_f64(name, {u.data(), static_cast<std::size_t>(u.size())},
                      {static_cast<std::size_t>(u.size())});
        };
        std::size_t i = 0;
        for (auto& b : self->blocks_) save_u(prefix + "d.sn" + std::to_string(i++) + ".u", *b.sn);
        save_u(prefix + "d.sn_head.u", *self->head_sn_);
        save_u(prefix + "d.sn_proj.u", *self->proj_sn_);
    }
}

template <typename S>
void Discriminator<S>::load_state(const persist::ArtifactReader& r, const std::string& prefix) {
    for (auto* p : trainable_params()) detail::load_param(r, prefix, *p);
    if (spec_.spectral_norm) {
        auto load_u = [&](const std::string& name, nn::SpectralNorm<S>& sn) {
            const auto u = r.f64(name);
            if (u.size() != static_cast<std::size_t>(sn.u_state().size()))
                throw FormatError("checkpoint spectral state size mismatch: " + name);
            for (std::size_t i = 0; i < u.size(); ++i)
                sn.u_state()[static_cast<Eigen::Index>(i)] = u[i];
        };
        std::size_t i = 0;
        for (auto& b : blocks_) load_u(prefix + "d.sn" + std::to_string(i++) + ".u", *b.sn);
        load_u(prefix + "d.sn_head.u", *head_sn_);
        load_u(prefix + "d.sn_proj.u", *proj_sn_);
    }
}

}  // namespace ccgm::models
