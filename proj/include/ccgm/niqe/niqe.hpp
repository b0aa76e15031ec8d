#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>

#include "ccgm/core/tensor.hpp"
#include "ccgm/data/dataset.hpp"

namespace ccgm::niqe {

struct NiqeSettings {
    int patch_size = 16;              // base-scale tile side, halved at scale 2
    double sharpness_quantile = 0.75; // fit-time patch selection threshold
    int scales = 2;                   // fixed; feature width is scales * 18

    void validate() const;
};

inline constexpr int kFeaturesPerScale = 18;

// Natural-statistics model: mean and covariance of NIQE features pooled over
// the sharp patches of a fitting corpus.
struct NiqeModel {
    Eigen::VectorXd feature_mean;  // 36
    Eigen::MatrixXd feature_cov;   // 36 x 36
    NiqeSettings settings;
    std::string fit_manifest;  // JSON: corpus hash, image count, settings

    void save(const std::filesystem::path& path) const;
    static NiqeModel load(const std::filesystem::path& path);
};

// ITU-R 601 luma of a [-1,1] CHW image, mapped to [0,255].
Eigen::MatrixXd to_gray255(const Tensor& image);

// Mean-subtracted contrast-normalized coefficients: (I - mu)/(sigma + 1)
// with mu/sigma from a 7x7 Gaussian window (sigma = 7/6, replicate border).
Eigen::MatrixXd mscn(const Eigen::MatrixXd& gray);

struct AggdParams {
    double alpha;       // shape
    double beta_left;   // left scale
    double beta_right;  // right scale
};

// Asymmetric generalized Gaussian fit by moment matching over the alpha grid
// [0.2, 10] in steps of 0.001.
AggdParams fit_aggd(std::span<const double> samples);

// Per-patch features (rows) of one image: AGGD parameters of the MSCN map and
// its four pairwise products at two scales. Patches whose base-scale local
// variance ranks below `sharpness_quantile` are discarded.
Eigen::MatrixXd niqe_features(const Eigen::MatrixXd& gray, const NiqeSettings& settings);
Eigen::MatrixXd niqe_features(const Tensor& image, const NiqeSettings& settings);

NiqeModel fit_niqe_model(const data::Dataset& dataset, const NiqeSettings& settings);

// Mahalanobis-type distance between the model statistics and the test image's
// patch-feature statistics; higher = less natural. Deterministic.
double niqe_score(const NiqeModel& model, const Tensor& image);
double niqe_score(const NiqeModel& model, const Eigen::MatrixXd& gray);

}  // namespace ccgm::niqe
