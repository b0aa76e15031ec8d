#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccgm/data/dataset.hpp"
#include "ccgm/losses/losses.hpp"
#include "ccgm/models/models.hpp"
#include "ccgm/negatives/negatives.hpp"
#include "ccgm/nn/layers.hpp"
#include "ccgm/vicinal/vicinal.hpp"

namespace ccgm::trainer {

struct TrainConfig {
    std::size_t steps = 1000;       // K
    std::size_t disc_batch = 64;    // m^d
    std::size_t gen_batch = 64;     // m^g
    int disc_updates_per_step = 2;
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    vicinal::VicinityParams vicinity;
    losses::DualNdaParams dual_nda;
    negatives::TypeIConfig type1;
    std::size_t nda_start_step = 0;
    bool augment = false;
    int jigsaw_grid = 2;  // used when dual_nda.lambda_nda > 0
    std::uint64_t seed = 0;
    models::GeneratorSpec gen_spec;
    models::DiscriminatorSpec disc_spec;
    std::size_t checkpoint_every = 0;  // 0 = final checkpoint only

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& json);
    std::uint64_t hash() const;

    bool negatives_active_at(std::size_t step) const {
        return step >= nda_start_step &&
               (dual_nda.lambda1 > 0.0 || dual_nda.lambda2 > 0.0 || dual_nda.lambda_nda > 0.0);
    }
};

struct StepLog {
    std::size_t step = 0;
    double d_loss = 0.0;  // mean over the step's discriminator updates
    double g_loss = 0.0;
    std::uint64_t saturations = 0;
    std::uint64_t widenings = 0;
    std::uint64_t nearest_fallbacks = 0;
    std::uint64_t anchor_resamples = 0;

    std::string csv_row() const;
    static std::string csv_header();
};

// Minimal DiffAugment stand-in: horizontal flip, zero-padded integer
// translation (<= 1/8 side), one zero cutout (<= 1/4 side). The same
// parameter draw is applied to every image attached to one anchor.
struct AugmentParams {
    bool flip = false;
    int tx = 0, ty = 0;
    int cut_x = 0, cut_y = 0, cut_size = 0;
};

AugmentParams draw_augment(Rng& rng, std::size_t side);
Tensor apply_augment(const Tensor& image, const AugmentParams& p);
Tensor augment_backward(const Tensor& d_out, const AugmentParams& p);
Tensor augment_minimal(const Tensor& image, Rng& rng);  // draw + apply

// One assembled discriminator batch (Algorithm-3 shape): per anchor, one
// real from the soft vicinity, one fake at a uniformly drawn vicinity label,
// and, once negatives are active, one Type I and one Type II sample, all
// conditioned at the perturbed anchor label.
struct DiscBatchData {
    Tensor real_images, fake_images, type1_images, type2_images, jigsaw_images;
    std::vector<double> targets;       // per anchor: clip(y + eps, 0, 1)
    std::vector<double> eps;           // per anchor
    std::vector<double> real_weights;  // w^r
    std::vector<double> fake_weights;  // w^g
    std::vector<AugmentParams> aug;    // per anchor (when augmentation is on)
    bool negatives_active = false;
    std::uint64_t widenings = 0;
    std::uint64_t nearest_fallbacks = 0;
    std::uint64_t anchor_resamples = 0;
};

class Trainer {
public:
    Trainer(TrainConfig config, const data::Dataset& dataset,
            const negatives::NegativePool* pool);

    // Runs training up to `until_step` (exclusive upper bound in steps done so
    // far; pass config.steps for a full run). Appends one CSV row per step
    // when a log path is given.
    void run(std::size_t until_step, const std::optional<std::filesystem::path>& log_csv,
             const std::optional<std::filesystem::path>& checkpoint_dir);

    DiscBatchData build_disc_batch(std::size_t step, int update_index);

    std::size_t step() const { return step_; }
    const TrainConfig& config() const { return config_; }
    models::GeneratorF& generator() { return *gen_; }
    models::DiscriminatorF& discriminator() { return *disc_; }
    const std::vector<StepLog>& logs() const { return logs_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    static std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path,
                                                    const data::Dataset& dataset,
                                                    const negatives::NegativePool* pool);

    // Conditional sampling from the trained generator: n_per_label fakes for
    // each normalized label, deterministic in `seed`.
    static std::vector<data::LabeledImage> sample(models::GeneratorF& gen,
                                                  const data::LabelSpace& space,
                                                  std::span<const double> labels_norm,
                                                  std::size_t n_per_label, std::uint64_t seed);

private:
    struct Anchor {
        double target = 0.0;
        double eps = 0.0;
        std::size_t real_index = 0;
        double real_weight = 0.0;
        double fake_label = 0.0;
        double fake_weight = 0.0;
        std::size_t type1_index = 0;
        const negatives::PoolEntry* type2 = nullptr;
        std::size_t jigsaw_index = 0;
    };

    Anchor draw_anchor(std::size_t step, int update_index, std::size_t anchor_index,
                       bool negatives_active, DiscBatchData& counters);
    double disc_update(std::size_t step, int update_index);
    double gen_update(std::size_t step);
    void write_divergence_dump(const DiscBatchData& batch, const std::string& where) const;

    TrainConfig config_;
    const data::Dataset* dataset_;
    const negatives::NegativePool* pool_;
    std::unique_ptr<models::GeneratorF> gen_;
    std::unique_ptr<models::DiscriminatorF> disc_;
    std::unique_ptr<nn::Adam<float>> gen_opt_;
    std::unique_ptr<nn::Adam<float>> disc_opt_;
    std::size_t step_ = 0;
    std::vector<StepLog> logs_;
    std::uint64_t saturation_total_ = 0;

    // labels sorted for vicinity range lookups: (label, image index)
    std::vector<std::pair<double, std::size_t>> sorted_labels_;
};

// Serializes labeled image sets (sampling output) in the dataset cache
// directory layout.
void save_fake_set(const std::filesystem::path& dir, const std::vector<data::LabeledImage>& images,
                   const data::LabelSpace& space);

}  // namespace ccgm::trainer
