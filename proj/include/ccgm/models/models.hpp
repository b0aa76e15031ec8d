#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ccgm/core/errors.hpp"
#include "ccgm/nn/layers.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::models {

struct GeneratorSpec {
    std::size_t z_dim = 128;
    std::size_t label_embed_dim = 128;
    std::size_t base_channels = 64;  // channels at the 4x4 root
    std::size_t out_channels = 1;
    std::size_t resolution = 32;

    void validate() const;
    std::size_t upsample_stages() const;
};

struct DiscriminatorSpec {
    std::size_t base_channels = 32;
    std::size_t label_embed_dim = 128;
    std::size_t in_channels = 1;
    std::size_t resolution = 32;
    bool spectral_norm = true;

    void validate() const;
    std::size_t down_stages() const;
};

// Smooth label -> embedding map: two affine + nonlinearity stages. Stand-in
// for the improved-label-input mechanism of the CcGAN line.
template <typename S>
class LabelMlp {
public:
    LabelMlp() = default;
    LabelMlp(const std::string& name, std::size_t embed_dim, Rng& rng)
        : l1_(name + ".l1", 1, embed_dim, rng), l2_(name + ".l2", embed_dim, embed_dim, rng) {}

    TensorT<S> forward(const TensorT<S>& labels) {
        return a2_.forward(l2_.forward(a1_.forward(l1_.forward(labels))));
    }

    TensorT<S> backward(const TensorT<S>& d_embed) {
        return l1_.backward(a1_.backward(l2_.backward(a2_.backward(d_embed))));
    }

    void collect(std::vector<nn::Param<S>*>& out) {
        l1_.collect(out);
        l2_.collect(out);
    }

private:
    nn::Linear<S> l1_, l2_;
    nn::LeakyReLU<S> a1_{0.2}, a2_{0.2};
};

// Upsampling convolutional generator. The label embedding is added to each
// block's input as a per-channel bias; output passes through tanh.
template <typename S>
class Generator {
public:
    explicit Generator(const GeneratorSpec& spec, std::uint64_t seed);

    // z: N x z_dim, labels_norm: N x 1. Training mode uses batch statistics
    // in the norm layers; inference mode is per-sample deterministic.
    TensorT<S> forward(const TensorT<S>& z, const TensorT<S>& labels, bool training);

    // Accumulates parameter gradients from dL/d(images).
    void backward(const TensorT<S>& d_images);

    const GeneratorSpec& spec() const { return spec_; }
    std::vector<nn::Param<S>*> trainable_params();
    std::size_t param_count();

    void save_state(persist::ArtifactWriter& w, const std::string& prefix) const;
    void load_state(const persist::ArtifactReader& r, const std::string& prefix);

private:
    struct Block {
        nn::Linear<S> inject;
        nn::Upsample2x<S> up;
        nn::Conv2d<S> conv;
        nn::BatchNorm2d<S> bn;
        nn::ReLU<S> act;
        std::size_t in_channels = 0;
    };

    GeneratorSpec spec_;
    LabelMlp<S> emb_;
    nn::Linear<S> fc_;
    std::vector<Block> blocks_;
    nn::Conv2d<S> out_conv_;
    nn::Tanh<S> out_act_;
    std::size_t last_batch_ = 0;
};

// Strided convolutional discriminator with optional spectral normalization
// and projection label conditioning on the pooled features. Returns raw
// (pre-activation) scores; the vanilla loss head applies a sigmoid on top.
template <typename S>
class Discriminator {
public:
    explicit Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

    std::vector<double> forward(const TensorT<S>& images, const TensorT<S>& labels);

    // d_scores: dL/d(raw score) per sample. Returns dL/d(images) when
    // requested (for generator updates).
    TensorT<S> backward(std::span<const double> d_scores, bool want_input_grad);

    // Spectral-norm bookkeeping around each optimizer step.
    void refresh_spectral();                  // effective = raw / sigma
    void collect_spectral_grads();            // map effective grads onto raw
    std::vector<double> effective_sigmas();   // accurate top singular values

    const DiscriminatorSpec& spec() const { return spec_; }
    std::vector<nn::Param<S>*> trainable_params();
    std::size_t param_count();

    void save_state(persist::ArtifactWriter& w, const std::string& prefix) const;
    void load_state(const persist::ArtifactReader& r, const std::string& prefix);

private:
    struct Block {
        nn::Conv2d<S> conv;
        std::unique_ptr<nn::SpectralNorm<S>> sn;
        nn::LeakyReLU<S> act{0.2};
    };

    DiscriminatorSpec spec_;
    LabelMlp<S> emb_;
    std::vector<Block> blocks_;
    nn::Linear<S> head_;
    nn::Linear<S> proj_;
    std::unique_ptr<nn::SpectralNorm<S>> head_sn_;
    std::unique_ptr<nn::SpectralNorm<S>> proj_sn_;

    TensorT<S> feat_;      // pooled features, N x F
    TensorT<S> proj_emb_;  // projected embedding, N x F
    std::size_t feat_h_ = 0, feat_w_ = 0;
};

// Spec-level convenience wrappers.
template <typename S>
TensorT<S> generate(Generator<S>& gen, const TensorT<S>& z, const TensorT<S>& labels) {
    for (std::size_t i = 0; i < labels.numel(); ++i) {
        const double y = labels[i];
        if (y < 0.0 || y > 1.0) throw DomainError("generate: labels must lie in [0,1]");
    }
    for (std::size_t i = 0; i < z.numel(); ++i)
        if (!std::isfinite(static_cast<double>(z[i]))) throw DomainError("generate: non-finite z");
    if (z.dim(0) != labels.dim(0)) throw DomainError("generate: batch size mismatch");
    return gen.forward(z, labels, /*training=*/false);
}

enum class DiscHead { raw, sigmoid };

template <typename S>
std::vector<double> discriminate(Discriminator<S>& disc, const TensorT<S>& images,
                                 const TensorT<S>& labels, DiscHead head = DiscHead::raw) {
    if (images.dim(0) != labels.dim(0)) throw DomainError("discriminate: batch size mismatch");
    auto scores = disc.forward(images, labels);
    if (head == DiscHead::sigmoid)
        for (auto& s : scores) s = 1.0 / (1.0 + std::exp(-s));
    return scores;
}

using GeneratorF = Generator<float>;
using DiscriminatorF = Discriminator<float>;

}  // namespace ccgm::models
#include "ccgm/models/models_impl.hpp"
