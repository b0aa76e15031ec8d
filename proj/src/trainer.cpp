#include "ccgm/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/stats.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::trainer {

namespace {

// Stream family tags: every random draw is a pure function of
// (seed, family, step, update, anchor, purpose).
constexpr std::uint64_t kDiscFamily = 1;
constexpr std::uint64_t kGenFamily = 2;
constexpr std::uint64_t kSampleFamily = 3;

enum Purpose : std::uint64_t {
    kAnchor = 0,
    kRealPick = 1,
    kFakeDraw = 2,
    kType1Pick = 3,
    kType2Pick = 4,
    kAugment = 5,
    kJigsaw = 6,
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void TrainConfig::validate() const {
    if (steps == 0) throw ConfigError("train.steps must be > 0");
    if (disc_batch == 0 || gen_batch == 0) throw ConfigError("batch sizes must be > 0");
    if (disc_updates_per_step <= 0) throw ConfigError("disc_updates_per_step must be > 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (nda_start_step > steps) throw ConfigError("nda_start_step must be <= steps");
    vicinity.validate();
    dual_nda.validate();
    type1.validate();
    gen_spec.validate();
    disc_spec.validate();
    if (gen_spec.resolution != disc_spec.resolution)
        throw ConfigError("generator/discriminator resolution mismatch");
    if (gen_spec.out_channels != disc_spec.in_channels)
        throw ConfigError("generator/discriminator channel mismatch");
    if (dual_nda.lambda_nda > 0.0 && jigsaw_grid != 2 && jigsaw_grid != 4)
        throw ConfigError("jigsaw_grid must be 2 or 4");
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["steps"] = steps;
    j["disc_batch"] = disc_batch;
    j["gen_batch"] = gen_batch;
    j["disc_updates_per_step"] = disc_updates_per_step;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["vicinity"] = {{"sigma", vicinity.sigma},
                     {"nu", vicinity.nu},
                     {"kappa", vicinity.kappa},
                     {"weight_floor", vicinity.weight_floor}};
    j["dual_nda"] = {{"lambda1", dual_nda.lambda1},
                     {"lambda2", dual_nda.lambda2},
                     {"lambda_nda", dual_nda.lambda_nda},
                     {"variant", losses::to_string(dual_nda.variant)}};
    j["q1"] = type1.q1;
    j["nda_start_step"] = nda_start_step;
    j["augment"] = augment;
    j["jigsaw_grid"] = jigsaw_grid;
    j["seed"] = seed;
    j["gen_spec"] = {{"z_dim", gen_spec.z_dim},
                     {"label_embed_dim", gen_spec.label_embed_dim},
                     {"base_channels", gen_spec.base_channels},
                     {"out_channels", gen_spec.out_channels},
                     {"resolution", gen_spec.resolution}};
    j["disc_spec"] = {{"base_channels", disc_spec.base_channels},
                      {"label_embed_dim", disc_spec.label_embed_dim},
                      {"in_channels", disc_spec.in_channels},
                      {"resolution", disc_spec.resolution},
                      {"spectral_norm", disc_spec.spectral_norm}};
    j["checkpoint_every"] = checkpoint_every;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& json) {
    const auto j = nlohmann::json::parse(json);
    TrainConfig c;
    c.steps = j.at("steps").get<std::size_t>();
    c.disc_batch = j.at("disc_batch").get<std::size_t>();
    c.gen_batch = j.at("gen_batch").get<std::size_t>();
    c.disc_updates_per_step = j.at("disc_updates_per_step").get<int>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.vicinity.sigma = j.at("vicinity").at("sigma").get<double>();
    c.vicinity.nu = j.at("vicinity").at("nu").get<double>();
    c.vicinity.kappa = j.at("vicinity").at("kappa").get<double>();
    c.vicinity.weight_floor = j.at("vicinity").at("weight_floor").get<double>();
    c.dual_nda.lambda1 = j.at("dual_nda").at("lambda1").get<double>();
    c.dual_nda.lambda2 = j.at("dual_nda").at("lambda2").get<double>();
    c.dual_nda.lambda_nda = j.at("dual_nda").at("lambda_nda").get<double>();
    c.dual_nda.variant = losses::loss_variant_from_string(
        j.at("dual_nda").at("variant").get<std::string>());
    c.type1.q1 = j.at("q1").get<double>();
    c.nda_start_step = j.at("nda_start_step").get<std::size_t>();
    c.augment = j.at("augment").get<bool>();
    c.jigsaw_grid = j.at("jigsaw_grid").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.gen_spec.z_dim = j.at("gen_spec").at("z_dim").get<std::size_t>();
    c.gen_spec.label_embed_dim = j.at("gen_spec").at("label_embed_dim").get<std::size_t>();
    c.gen_spec.base_channels = j.at("gen_spec").at("base_channels").get<std::size_t>();
    c.gen_spec.out_channels = j.at("gen_spec").at("out_channels").get<std::size_t>();
    c.gen_spec.resolution = j.at("gen_spec").at("resolution").get<std::size_t>();
    c.disc_spec.base_channels = j.at("disc_spec").at("base_channels").get<std::size_t>();
    c.disc_spec.label_embed_dim = j.at("disc_spec").at("label_embed_dim").get<std::size_t>();
    c.disc_spec.in_channels = j.at("disc_spec").at("in_channels").get<std::size_t>();
    c.disc_spec.resolution = j.at("disc_spec").at("resolution").get<std::size_t>();
    c.disc_spec.spectral_norm = j.at("disc_spec").at("spectral_norm").get<bool>();
    c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
    return c;
}

std::uint64_t TrainConfig::hash() const {
    const std::string j = to_json();
    return persist::fnv1a64({reinterpret_cast<const std::uint8_t*>(j.data()), j.size()});
}

std::string StepLog::csv_header() {
    return "step,d_loss,g_loss,saturations,widenings,nearest_fallbacks,anchor_resamples";
}

std::string StepLog::csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%llu,%llu,%llu,%llu", step, d_loss, g_loss,
                  static_cast<unsigned long long>(saturations),
                  static_cast<unsigned long long>(widenings),
                  static_cast<unsigned long long>(nearest_fallbacks),
                  static_cast<unsigned long long>(anchor_resamples));
    return buf;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentParams draw_augment(Rng& rng, std::size_t side) {
    AugmentParams p;
    p.flip = rng.uniform() < 0.5;
    const int max_shift = static_cast<int>(side / 8);
    p.tx = static_cast<int>(rng.uniform_index(2 * max_shift + 1)) - max_shift;
    p.ty = static_cast<int>(rng.uniform_index(2 * max_shift + 1)) - max_shift;
    const int max_cut = static_cast<int>(side / 4);
    p.cut_size = static_cast<int>(rng.uniform_index(max_cut + 1));
    if (p.cut_size > 0) {
        p.cut_x = static_cast<int>(rng.uniform_index(side - p.cut_size + 1));
        p.cut_y = static_cast<int>(rng.uniform_index(side - p.cut_size + 1));
    }
    return p;
}

Tensor apply_augment(const Tensor& image, const AugmentParams& p) {
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    Tensor out({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - p.ty;
                std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - p.tx;
                if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H) || sx < 0 ||
                    sx >= static_cast<std::ptrdiff_t>(W)) {
                    out(c, y, x) = 0.0f;
                    continue;
                }
                if (p.flip) sx = static_cast<std::ptrdiff_t>(W) - 1 - sx;
                out(c, y, x) = image(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        }
    }
    if (p.cut_size > 0) {
        for (std::size_t c = 0; c < C; ++c)
            for (int y = p.cut_y; y < p.cut_y + p.cut_size; ++y)
                for (int x = p.cut_x; x < p.cut_x + p.cut_size; ++x)
                    out(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 0.0f;
    }
    return out;
}

Tensor augment_backward(const Tensor& d_out, const AugmentParams& p) {
    const std::size_t C = d_out.dim(0), H = d_out.dim(1), W = d_out.dim(2);
    Tensor d_in({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                if (p.cut_size > 0 && static_cast<int>(y) >= p.cut_y &&
                    static_cast<int>(y) < p.cut_y + p.cut_size && static_cast<int>(x) >= p.cut_x &&
                    static_cast<int>(x) < p.cut_x + p.cut_size)
                    continue;
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - p.ty;
                std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - p.tx;
                if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H) || sx < 0 ||
                    sx >= static_cast<std::ptrdiff_t>(W))
                    continue;
                if (p.flip) sx = static_cast<std::ptrdiff_t>(W) - 1 - sx;
                d_in(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) +=
                    d_out(c, y, x);
            }
        }
    }
    return d_in;
}

Tensor augment_minimal(const Tensor& image, Rng& rng) {
    return apply_augment(image, draw_augment(rng, image.dim(2)));
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig config, const data::Dataset& dataset,
                 const negatives::NegativePool* pool)
    : config_(std::move(config)), dataset_(&dataset), pool_(pool) {
    config_.validate();
    if (config_.dual_nda.lambda2 > 0.0 && (pool_ == nullptr || pool_->size() == 0))
        throw ConfigError(
            "dual-NDA with lambda2 > 0 requires a nonempty Type II pool (run build-negatives)");
    if (dataset_->height() != config_.gen_spec.resolution)
        throw ConfigError("dataset resolution does not match the model spec");
    if (dataset_->channels() != config_.gen_spec.out_channels)
        throw ConfigError("dataset channels do not match the model spec");

    gen_ = std::make_unique<models::GeneratorF>(config_.gen_spec,
                                                Rng::splitmix64(config_.seed ^ 0x47454eULL));
    disc_ = std::make_unique<models::DiscriminatorF>(config_.disc_spec,
                                                     Rng::splitmix64(config_.seed ^ 0x444953ULL));
    gen_opt_ = std::make_unique<nn::Adam<float>>(gen_->trainable_params(), config_.lr,
                                                 config_.beta1, config_.beta2);
    disc_opt_ = std::make_unique<nn::Adam<float>>(disc_->trainable_params(), config_.lr,
                                                  config_.beta1, config_.beta2);

    sorted_labels_.reserve(dataset_->size());
    for (std::size_t i = 0; i < dataset_->size(); ++i)
        sorted_labels_.emplace_back(dataset_->labels_norm()[i], i);
    std::sort(sorted_labels_.begin(), sorted_labels_.end());
}

Trainer::Anchor Trainer::draw_anchor(std::size_t step, int update_index, std::size_t anchor_index,
                                     bool negatives_active, DiscBatchData& counters) {
    const auto& distinct = dataset_->label_space().distinct_labels();
    const double radius = vicinal::soft_radius(config_.vicinity);
    const auto u = static_cast<std::uint64_t>(update_index);

    Rng anchor_rng = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kAnchor});
    const bool need_type1 = negatives_active && config_.dual_nda.lambda1 > 0.0;

    Anchor a;
    bool accepted = false;
    std::size_t range_lo = 0, range_hi = 0;
    double type1_c = 0.0;
    std::size_t type1_count = 0;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double y = distinct[anchor_rng.uniform_index(distinct.size())];
        a.eps = anchor_rng.normal() * config_.vicinity.sigma;
        a.target = std::clamp(y + a.eps, 0.0, 1.0);

        // Soft vicinity is the open interval (target - r, target + r),
        // matching the strict weight > floor rule.
        auto lo = std::upper_bound(sorted_labels_.begin(), sorted_labels_.end(),
                                   std::make_pair(a.target - radius, dataset_->size()));
        auto hi = std::lower_bound(sorted_labels_.begin(), sorted_labels_.end(),
                                   std::make_pair(a.target + radius, std::size_t{0}));
        if (lo >= hi) {
            ++counters.anchor_resamples;
            continue;
        }
        range_lo = static_cast<std::size_t>(lo - sorted_labels_.begin());
        range_hi = static_cast<std::size_t>(hi - sorted_labels_.begin());

        if (need_type1) {
            type1_c = negatives::type1_threshold(dataset_->labels_norm(), a.target, config_.type1.q1);
            type1_count = 0;
            for (double l : dataset_->labels_norm())
                if (std::abs(a.target - l) > type1_c) ++type1_count;
            if (type1_count == 0) {
                ++counters.anchor_resamples;
                continue;
            }
        }
        accepted = true;
        break;
    }
    if (!accepted) {
        throw TrainingError(
            "no admissible anchor after 100 resamples (soft vicinity or Type I set empty; "
            "check nu / q1 against the label distribution)");
    }

    {
        Rng pick = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kRealPick});
        const std::size_t j = range_lo + pick.uniform_index(range_hi - range_lo);
        a.real_index = sorted_labels_[j].second;
        a.real_weight =
            vicinal::soft_weight(sorted_labels_[j].first, a.target, config_.vicinity.nu);
    }
    {
        Rng fake = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kFakeDraw});
        a.fake_label = std::clamp(fake.uniform(a.target - radius, a.target + radius), 0.0, 1.0);
        a.fake_weight = vicinal::soft_weight(a.fake_label, a.target, config_.vicinity.nu);
    }
    if (need_type1) {
        Rng pick = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kType1Pick});
        std::size_t want = pick.uniform_index(type1_count);
        const auto& labels = dataset_->labels_norm();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (std::abs(a.target - labels[i]) > type1_c) {
                if (want == 0) {
                    a.type1_index = i;
                    break;
                }
                --want;
            }
        }
    }
    if (negatives_active && config_.dual_nda.lambda2 > 0.0) {
        Rng pick = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kType2Pick});
        negatives::PoolQueryStats stats;
        a.type2 = &pool_->query_vicinity(a.target, config_.vicinity.kappa, pick, &stats);
        counters.widenings += static_cast<std::uint64_t>(stats.widenings);
        if (stats.nearest_fallback) ++counters.nearest_fallbacks;
    }
    if (negatives_active && config_.dual_nda.lambda_nda > 0.0) {
        Rng pick = Rng::derive(config_.seed, {kDiscFamily, step, u, anchor_index, kJigsaw});
        a.jigsaw_index = pick.uniform_index(dataset_->size());
    }
    return a;
}

DiscBatchData Trainer::build_disc_batch(std::size_t step, int update_index) {
    const std::size_t m = config_.disc_batch;
    const std::size_t C = dataset_->channels(), H = dataset_->height(), W = dataset_->width();
    DiscBatchData b;
    b.negatives_active = config_.negatives_active_at(step);
    const bool with_type1 = b.negatives_active && config_.dual_nda.lambda1 > 0.0;
    const bool with_type2 = b.negatives_active && config_.dual_nda.lambda2 > 0.0;
    const bool with_jigsaw = b.negatives_active && config_.dual_nda.lambda_nda > 0.0;

    b.real_images = Tensor({m, C, H, W});
    b.fake_images = Tensor({m, C, H, W});
    if (with_type1) b.type1_images = Tensor({m, C, H, W});
    if (with_type2) b.type2_images = Tensor({m, C, H, W});
    if (with_jigsaw) b.jigsaw_images = Tensor({m, C, H, W});
    b.targets.resize(m);
    b.eps.resize(m);
    b.real_weights.resize(m);
    b.fake_weights.resize(m);
    if (config_.augment) b.aug.resize(m);

    // Fake conditioning labels to generate in one batched inference call.
    Tensor fake_z({m, config_.gen_spec.z_dim});
    Tensor fake_y({m, 1});

    const std::size_t plane = C * H * W;
    auto copy_image = [&](Tensor& dst, std::size_t slot, const Tensor& src) {
        std::copy(src.flat().begin(), src.flat().end(),
                  dst.flat().begin() + static_cast<std::ptrdiff_t>(slot * plane));
    };

    for (std::size_t i = 0; i < m; ++i) {
        Anchor a = draw_anchor(step, update_index, i, b.negatives_active, b);
        b.targets[i] = a.target;
        b.eps[i] = a.eps;
        b.real_weights[i] = a.real_weight;
        b.fake_weights[i] = a.fake_weight;
        copy_image(b.real_images, i, dataset_->image(a.real_index).pixels);
        {
            Rng fake = Rng::derive(config_.seed,
                                   {kDiscFamily, step, static_cast<std::uint64_t>(update_index), i,
                                    kFakeDraw, 1});
            for (std::size_t d = 0; d < config_.gen_spec.z_dim; ++d)
                fake_z[i * config_.gen_spec.z_dim + d] = static_cast<float>(fake.normal());
            fake_y[i] = static_cast<float>(a.fake_label);
        }
        if (with_type1) copy_image(b.type1_images, i, dataset_->image(a.type1_index).pixels);
        if (with_type2) copy_image(b.type2_images, i, a.type2->image);
        if (with_jigsaw) {
            Rng jig = Rng::derive(config_.seed,
                                  {kDiscFamily, step, static_cast<std::uint64_t>(update_index), i,
                                   kJigsaw, 1});
            Tensor scrambled = negatives::jigsaw_negative(dataset_->image(a.jigsaw_index).pixels,
                                                          config_.jigsaw_grid, jig);
            copy_image(b.jigsaw_images, i, scrambled);
        }
        if (config_.augment) {
            Rng aug = Rng::derive(config_.seed,
                                  {kDiscFamily, step, static_cast<std::uint64_t>(update_index), i,
                                   kAugment});
            b.aug[i] = draw_augment(aug, W);
        }
    }

    b.fake_images = gen_->forward(fake_z, fake_y, /*training=*/false);

    if (config_.augment) {
        auto augment_group = [&](Tensor& group) {
            if (group.numel() == 0) return;
            for (std::size_t i = 0; i < m; ++i) {
                Tensor one({C, H, W});
                std::copy_n(group.flat().begin() + static_cast<std::ptrdiff_t>(i * plane), plane,
                            one.flat().begin());
                Tensor out = apply_augment(one, b.aug[i]);
                std::copy(out.flat().begin(), out.flat().end(),
                          group.flat().begin() + static_cast<std::ptrdiff_t>(i * plane));
            }
        };
        augment_group(b.real_images);
        augment_group(b.fake_images);
        augment_group(b.type1_images);
        augment_group(b.type2_images);
        augment_group(b.jigsaw_images);
    }
    return b;
}

double Trainer::disc_update(std::size_t step, int update_index) {
    disc_opt_->zero_grad();
    DiscBatchData batch = build_disc_batch(step, update_index);
    const std::size_t m = config_.disc_batch;
    const std::size_t C = dataset_->channels(), H = dataset_->height(), W = dataset_->width();
    const std::size_t plane = C * H * W;

    std::vector<const Tensor*> groups{&batch.real_images, &batch.fake_images};
    if (batch.type1_images.numel()) groups.push_back(&batch.type1_images);
    if (batch.type2_images.numel()) groups.push_back(&batch.type2_images);
    if (batch.jigsaw_images.numel()) groups.push_back(&batch.jigsaw_images);
    const std::size_t n_total = groups.size() * m;

    Tensor images({n_total, C, H, W});
    Tensor labels({n_total, 1});
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::copy(groups[g]->flat().begin(), groups[g]->flat().end(),
                  images.flat().begin() + static_cast<std::ptrdiff_t>(g * m * plane));
        for (std::size_t i = 0; i < m; ++i)
            labels[g * m + i] = static_cast<float>(batch.targets[i]);
    }

    const std::vector<double> raw = disc_->forward(images, labels);
    const bool vanilla = config_.dual_nda.variant == losses::LossVariant::vanilla;
    std::vector<double> outs(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) outs[i] = vanilla ? sigmoid(raw[i]) : raw[i];

    losses::DiscBatch lb;
    lb.real_terms.resize(m);
    lb.fake_terms.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        lb.real_terms[i] = {outs[i], batch.real_weights[i]};
        lb.fake_terms[i] = {outs[m + i], batch.fake_weights[i]};
    }
    std::size_t at = 2 * m;
    if (batch.type1_images.numel()) {
        lb.type1_outputs.assign(outs.begin() + static_cast<std::ptrdiff_t>(at),
                                outs.begin() + static_cast<std::ptrdiff_t>(at + m));
        at += m;
    }
    if (batch.type2_images.numel()) {
        lb.type2_terms.resize(m);
        for (std::size_t i = 0; i < m; ++i) lb.type2_terms[i] = {outs[at + i], 1.0};
        at += m;
    }
    if (batch.jigsaw_images.numel()) {
        lb.jigsaw_outputs.assign(outs.begin() + static_cast<std::ptrdiff_t>(at),
                                 outs.begin() + static_cast<std::ptrdiff_t>(at + m));
        at += m;
    }

    losses::DualNdaParams eff = config_.dual_nda;
    if (!batch.negatives_active) {
        eff.lambda1 = 0.0;
        eff.lambda2 = 0.0;
        eff.lambda_nda = 0.0;
    }
    const auto res = losses::disc_loss_dual_nda(lb, eff);
    if (!std::isfinite(res.value)) {
        write_divergence_dump(batch, "disc_update");
        throw TrainingError("non-finite discriminator loss at step " + std::to_string(step));
    }

    std::vector<double> d_raw(n_total, 0.0);
    auto chain = [&](std::size_t offset, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
            const std::size_t idx = offset + i;
            d_raw[idx] = vanilla ? grads[i] * outs[idx] * (1.0 - outs[idx]) : grads[i];
        }
    };
    chain(0, res.grad_real);
    chain(m, res.grad_fake);
    at = 2 * m;
    if (!lb.type1_outputs.empty()) {
        chain(at, res.grad_type1);
        at += m;
    }
    if (!lb.type2_terms.empty()) {
        chain(at, res.grad_type2);
        at += m;
    }
    if (!lb.jigsaw_outputs.empty()) {
        chain(at, res.grad_jigsaw);
        at += m;
    }

    disc_->backward(d_raw, /*want_input_grad=*/false);
    disc_->collect_spectral_grads();
    disc_opt_->step();

    auto& log = logs_.back();
    log.saturations += static_cast<std::uint64_t>(res.saturation_count);
    log.widenings += batch.widenings;
    log.nearest_fallbacks += batch.nearest_fallbacks;
    log.anchor_resamples += batch.anchor_resamples;
    return res.value;
}

double Trainer::gen_update(std::size_t step) {
    gen_opt_->zero_grad();
    const std::size_t m = config_.gen_batch;
    const auto& distinct = dataset_->label_space().distinct_labels();

    Tensor z({m, config_.gen_spec.z_dim});
    Tensor y({m, 1});
    std::vector<AugmentParams> aug(config_.augment ? m : 0);
    for (std::size_t i = 0; i < m; ++i) {
        Rng rng = Rng::derive(config_.seed, {kGenFamily, step, i, kAnchor});
        const double base = distinct[rng.uniform_index(distinct.size())];
        const double target = std::clamp(base + rng.normal() * config_.vicinity.sigma, 0.0, 1.0);
        y[i] = static_cast<float>(target);
        Rng zrng = Rng::derive(config_.seed, {kGenFamily, step, i, kFakeDraw});
        for (std::size_t d = 0; d < config_.gen_spec.z_dim; ++d)
            z[i * config_.gen_spec.z_dim + d] = static_cast<float>(zrng.normal());
        if (config_.augment) {
            Rng arng = Rng::derive(config_.seed, {kGenFamily, step, i, kAugment});
            aug[i] = draw_augment(arng, dataset_->width());
        }
    }

    Tensor fakes = gen_->forward(z, y, /*training=*/true);
    const std::size_t C = fakes.dim(1), H = fakes.dim(2), W = fakes.dim(3);
    const std::size_t plane = C * H * W;
    Tensor d_input = fakes;
    if (config_.augment) {
        for (std::size_t i = 0; i < m; ++i) {
            Tensor one({C, H, W});
            std::copy_n(fakes.flat().begin() + static_cast<std::ptrdiff_t>(i * plane), plane,
                        one.flat().begin());
            Tensor out = apply_augment(one, aug[i]);
            std::copy(out.flat().begin(), out.flat().end(),
                      d_input.flat().begin() + static_cast<std::ptrdiff_t>(i * plane));
        }
    }

    const std::vector<double> raw = disc_->forward(d_input, y);
    const bool vanilla = config_.dual_nda.variant == losses::LossVariant::vanilla;
    std::vector<double> outs(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) outs[i] = vanilla ? sigmoid(raw[i]) : raw[i];

    const auto res = losses::gen_loss(outs, config_.dual_nda.variant);
    if (!std::isfinite(res.value)) {
        DiscBatchData dump;
        dump.fake_images = fakes;
        write_divergence_dump(dump, "gen_update");
        throw TrainingError("non-finite generator loss at step " + std::to_string(step));
    }
    std::vector<double> d_raw(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        d_raw[i] = vanilla ? res.grad[i] * outs[i] * (1.0 - outs[i]) : res.grad[i];

    Tensor dx = disc_->backward(d_raw, /*want_input_grad=*/true);
    disc_->collect_spectral_grads();  // keep effective-weight scratch clean
    if (config_.augment) {
        Tensor dx_un({m, C, H, W});
        for (std::size_t i = 0; i < m; ++i) {
            Tensor one({C, H, W});
            std::copy_n(dx.flat().begin() + static_cast<std::ptrdiff_t>(i * plane), plane,
                        one.flat().begin());
            Tensor back = augment_backward(one, aug[i]);
            std::copy(back.flat().begin(), back.flat().end(),
                      dx_un.flat().begin() + static_cast<std::ptrdiff_t>(i * plane));
        }
        dx = dx_un;
    }
    gen_->backward(dx);
    gen_opt_->step();

    logs_.back().saturations += static_cast<std::uint64_t>(res.saturation_count);
    return res.value;
}

void Trainer::run(std::size_t until_step, const std::optional<std::filesystem::path>& log_csv,
                  const std::optional<std::filesystem::path>& checkpoint_dir) {
    if (until_step > config_.steps) throw ConfigError("until_step exceeds configured steps");
    if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);
    std::ofstream csv;
    if (log_csv) {
        const bool fresh = !std::filesystem::exists(*log_csv) ||
                           std::filesystem::file_size(*log_csv) == 0;
        csv.open(*log_csv, std::ios::app);
        if (!csv) throw ConfigError("cannot open log file: " + log_csv->string());
        if (fresh) csv << StepLog::csv_header() << "\n";
    }

    for (; step_ < until_step; ++step_) {
        StepLog log;
        log.step = step_;
        logs_.push_back(log);

        double d_sum = 0.0;
        for (int u = 0; u < config_.disc_updates_per_step; ++u) d_sum += disc_update(step_, u);
        logs_.back().d_loss = d_sum / config_.disc_updates_per_step;
        logs_.back().g_loss = gen_update(step_);

        if (csv.is_open()) {
            csv << logs_.back().csv_row() << "\n";
            csv.flush();
        }
        if (checkpoint_dir && config_.checkpoint_every > 0 &&
            (step_ + 1) % config_.checkpoint_every == 0 && step_ + 1 < until_step) {
            save_checkpoint(*checkpoint_dir /
                            ("checkpoint_step" + std::to_string(step_ + 1) + ".bin"));
        }
    }
    if (checkpoint_dir) save_checkpoint(*checkpoint_dir / "checkpoint_final.bin");
}

void Trainer::write_divergence_dump(const DiscBatchData& batch, const std::string& where) const {
    persist::ArtifactWriter w(persist::kCheckpointMagic);
    w.manifest()["kind"] = "divergence_dump";
    w.manifest()["where"] = where;
    w.manifest()["step"] = step_;
    auto add = [&](const char* name, const Tensor& t) {
        if (t.numel()) w.add_f32(name, t.flat(), t.shape());
    };
    add("real_images", batch.real_images);
    add("fake_images", batch.fake_images);
    add("type1_images", batch.type1_images);
    add("type2_images", batch.type2_images);
    std::vector<double> targets(batch.targets.begin(), batch.targets.end());
    if (!targets.empty()) w.add_f64("targets", targets, {targets.size()});
    w.write(std::filesystem::current_path() / ("diverged_step" + std::to_string(step_) + ".bin"));
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    persist::ArtifactWriter w(persist::kCheckpointMagic);
    w.manifest()["kind"] = "trainer_checkpoint";
    w.manifest()["config"] = nlohmann::json::parse(config_.to_json());
    w.manifest()["config_hash"] = config_.hash();
    w.manifest()["step"] = step_;
    w.manifest()["adam_g_t"] = gen_opt_->step_count();
    w.manifest()["adam_d_t"] = disc_opt_->step_count();
    gen_->save_state(w, "G.");
    disc_->save_state(w, "D.");
    auto save_moments = [&](const char* tag, nn::Adam<float>& opt) {
        auto& m = opt.first_moments();
        auto& v = opt.second_moments();
        for (std::size_t i = 0; i < m.size(); ++i) {
            w.add_f64(std::string(tag) + ".m." + std::to_string(i), m[i], {m[i].size()});
            w.add_f64(std::string(tag) + ".v." + std::to_string(i), v[i], {v[i].size()});
        }
    };
    save_moments("adam_g", *gen_opt_);
    save_moments("adam_d", *disc_opt_);
    w.write(path);
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const std::filesystem::path& path,
                                                  const data::Dataset& dataset,
                                                  const negatives::NegativePool* pool) {
    auto r = persist::ArtifactReader::open(path, persist::kCheckpointMagic);
    const auto config = TrainConfig::from_json(r.manifest().at("config").dump());
    auto t = std::make_unique<Trainer>(config, dataset, pool);
    t->step_ = r.manifest().at("step").get<std::size_t>();
    t->gen_->load_state(r, "G.");
    t->disc_->load_state(r, "D.");
    auto load_moments = [&](const char* tag, nn::Adam<float>& opt, std::uint64_t count) {
        auto& m = opt.first_moments();
        auto& v = opt.second_moments();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = r.f64(std::string(tag) + ".m." + std::to_string(i));
            v[i] = r.f64(std::string(tag) + ".v." + std::to_string(i));
        }
        opt.restore_step_count(count);
    };
    load_moments("adam_g", *t->gen_opt_, r.manifest().at("adam_g_t").get<std::uint64_t>());
    load_moments("adam_d", *t->disc_opt_, r.manifest().at("adam_d_t").get<std::uint64_t>());
    return t;
}

std::vector<data::LabeledImage> Trainer::sample(models::GeneratorF& gen,
                                                const data::LabelSpace& space,
                                                std::span<const double> labels_norm,
                                                std::size_t n_per_label, std::uint64_t seed) {
    std::vector<data::LabeledImage> out;
    out.reserve(labels_norm.size() * n_per_label);
    const std::size_t chunk = 128;
    for (std::size_t li = 0; li < labels_norm.size(); ++li) {
        const double y = labels_norm[li];
        if (y < 0.0 || y > 1.0) throw DomainError("sample: labels must lie in [0,1]");
        for (std::size_t j0 = 0; j0 < n_per_label; j0 += chunk) {
            const std::size_t n = std::min(chunk, n_per_label - j0);
            Tensor z({n, gen.spec().z_dim});
            Tensor y_t({n, 1});
            for (std::size_t j = 0; j < n; ++j) {
                Rng rng = Rng::derive(seed, {kSampleFamily, li, j0 + j});
                for (std::size_t d = 0; d < gen.spec().z_dim; ++d)
                    z[j * gen.spec().z_dim + d] = static_cast<float>(rng.normal());
                y_t[j] = static_cast<float>(y);
            }
            Tensor imgs = gen.forward(z, y_t, /*training=*/false);
            const std::size_t C = imgs.dim(1), H = imgs.dim(2), W = imgs.dim(3);
            for (std::size_t j = 0; j < n; ++j) {
                data::LabeledImage im;
                im.pixels = Tensor({C, H, W});
                std::copy_n(imgs.flat().begin() + static_cast<std::ptrdiff_t>(j * C * H * W),
                            C * H * W, im.pixels.flat().begin());
                im.label_norm = y;
                im.label_raw = space.denormalize(y);
                im.id = "fake_" + std::to_string(li) + "_" + std::to_string(j0 + j);
                out.push_back(std::move(im));
            }
        }
    }
    return out;
}

void save_fake_set(const std::filesystem::path& dir, const std::vector<data::LabeledImage>& images,
                   const data::LabelSpace& space) {
    data::Dataset set(images, space);
    set.save_cache(dir);
}

}  // namespace ccgm::trainer
