#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgm/data/dataset.hpp"
#include "ccgm/niqe/niqe.hpp"
#include "ccgm/nn/layers.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::eval {

// Frechet distance between Gaussians fitted to two feature sets (rows =
// samples). Covariances use 1/(n-1); the matrix square root goes through a
// symmetric eigendecomposition, with eigenvalues below -1e-6 treated as an
// error and small negatives clipped to zero.
double fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b);

// Small convolutional network shared by the three evaluation models:
// penultimate features (d = 64) feed either a classification or regression
// head.
class EvalNet {
public:
    EvalNet() = default;
    EvalNet(std::size_t in_channels, std::size_t resolution, std::size_t head_dim,
            std::uint64_t seed);

    static constexpr std::size_t kFeatureDim = 64;

    // Returns head outputs, N x head_dim. Caches for backward.
    TensorT<float> forward(const TensorT<float>& images);
    // Penultimate features of the most recent forward, N x 64.
    const TensorT<float>& features() const { return feat_; }
    void backward(const TensorT<float>& d_logits);

    std::vector<nn::Param<float>*> trainable_params();
    std::size_t head_dim() const { return head_dim_; }

    void save_state(persist::ArtifactWriter& w, const std::string& prefix) const;
    void load_state(const persist::ArtifactReader& r, const std::string& prefix);

private:
    std::size_t head_dim_ = 0;
    nn::Conv2d<float> c1_, c2_, c3_;
    nn::LeakyReLU<float> a1_{0.2}, a2_{0.2}, a3_{0.2};
    nn::Linear<float> head_;
    TensorT<float> feat_;
    std::size_t feat_h_ = 0, feat_w_ = 0;
};

// The three trained evaluation models plus the bin edges they were trained
// against. The feature extractor classifies coarse label bins; the regressor
// predicts normalized labels; the diversity classifier predicts a
// label-orthogonal nuisance attribute bin (bar thickness) when the corpus
// provides one, falling back to label bins otherwise.
struct EvalModels {
    EvalNet extractor;
    EvalNet regressor;
    EvalNet classifier;
    std::vector<double> label_bin_edges;
    std::vector<double> attr_bin_edges;
    std::string attr_name;  // empty = label bins
    double regressor_floor_raw = 0.0;  // training-set MAE in raw units

    void save(const std::filesystem::path& path) const;
    static EvalModels load(const std::filesystem::path& path);
};

struct EvalTrainSettings {
    std::size_t epochs = 8;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::size_t bins = 8;
};

EvalModels train_eval_models(const data::Dataset& dataset, const EvalTrainSettings& settings,
                             std::uint64_t seed);

Eigen::MatrixXd extract_features(EvalNet& net, std::span<const data::LabeledImage> images);

// Predicted normalized labels of the regressor.
std::vector<double> predict_labels(EvalNet& regressor, std::span<const data::LabeledImage> images);
// Argmax classes of the diversity classifier.
std::vector<int> predict_classes(EvalNet& classifier, std::span<const data::LabeledImage> images);

struct EvalConfig {
    std::vector<double> centers;  // normalized, sorted
    double radius = 0.0;          // normalized units
    std::size_t min_per_window = 50;
    std::size_t bins = 8;

    void validate() const;
};

struct PerCenterSeries {
    std::vector<double> centers_norm;
    std::vector<double> values;       // NaN when the center was skipped
    std::vector<bool> skipped;
    double mean = 0.0;
    double stddev = 0.0;
};

// Sliding FID over label windows [c - radius, c + radius]; centers without
// enough real and fake samples are skipped and reported.
PerCenterSeries sfid(EvalNet& extractor, std::span<const data::LabeledImage> real,
                     std::span<const data::LabeledImage> fake, const EvalConfig& config);

// Mean |predicted_raw - conditioning_raw| over the fake set, in raw label
// units, with a per-center breakdown.
struct LabelScoreResult {
    double mae_raw = 0.0;
    PerCenterSeries per_center;
};
LabelScoreResult label_score(EvalNet& regressor, std::span<const data::LabeledImage> fakes,
                             const data::LabelSpace& space, const EvalConfig& config);

// Mean per-center entropy of the classifier's predicted-class histogram.
PerCenterSeries diversity(EvalNet& classifier, std::span<const data::LabeledImage> fakes,
                          const EvalConfig& config);

struct NiqeAggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t score_errors = 0;
    PerCenterSeries per_center;
};
NiqeAggregate niqe_aggregate(const niqe::NiqeModel& model,
                             std::span<const data::LabeledImage> fakes, const EvalConfig& config);

struct MetricsReport {
    PerCenterSeries sfid;
    NiqeAggregate niqe;
    LabelScoreResult label_score;
    PerCenterSeries diversity;
    data::LabelSpace space;

    std::string to_json() const;
};

// One CSV per metric with (center_raw, value) rows plus a summary CSV shaped
// like the headline results table. Byte-identical on re-export.
void export_line_graphs(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace ccgm::eval
