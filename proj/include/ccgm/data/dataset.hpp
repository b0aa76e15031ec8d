#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgm/core/tensor.hpp"

namespace ccgm::data {

enum class LabelKind { integer_valued, strictly_continuous };

std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& s);

// Affine min-max map between raw label units and the normalized [0,1]
// domain, plus the set of distinct normalized training labels.
class LabelSpace {
public:
    LabelSpace(double raw_min, double raw_max, LabelKind kind,
               std::vector<double> distinct_labels_norm);

    double raw_min() const { return raw_min_; }
    double raw_max() const { return raw_max_; }
    LabelKind kind() const { return kind_; }
    const std::vector<double>& distinct_labels() const { return distinct_; }

    double normalize(double raw) const { return (raw - raw_min_) / (raw_max_ - raw_min_); }
    double denormalize(double norm) const { return raw_min_ + norm * (raw_max_ - raw_min_); }

    static LabelSpace from_raw_labels(std::span<const double> raw,
                                      std::optional<std::pair<double, double>> bounds,
                                      std::optional<LabelKind> kind_override);

private:
    double raw_min_;
    double raw_max_;
    LabelKind kind_;
    std::vector<double> distinct_;  // normalized, strictly increasing
};

struct LabeledImage {
    Tensor pixels;  // C x H x W, values in [-1, 1]
    double label_norm = 0.0;
    double label_raw = 0.0;
    std::string id;
    std::map<std::string, double> attrs;  // nuisance attributes (thickness, contrast, noise_sigma)
};

class Dataset {
public:
    Dataset(std::vector<LabeledImage> images, LabelSpace space);

    std::size_t size() const { return images_.size(); }
    const LabeledImage& image(std::size_t i) const { return images_[i]; }
    const std::vector<LabeledImage>& images() const { return images_; }
    const LabelSpace& label_space() const { return space_; }

    std::size_t channels() const { return images_.front().pixels.dim(0); }
    std::size_t height() const { return images_.front().pixels.dim(1); }
    std::size_t width() const { return images_.front().pixels.dim(2); }

    const std::vector<double>& labels_norm() const { return labels_norm_; }
    const std::vector<double>& labels_raw() const { return labels_raw_; }

    // Exact-match per-label index (keyed by the raw label).
    const std::vector<std::size_t>& indices_with_raw_label(double raw) const;
    bool has_raw_label(double raw) const { return by_raw_.count(raw) > 0; }
    const std::map<double, std::vector<std::size_t>>& label_index() const { return by_raw_; }

    void save_cache(const std::filesystem::path& dir) const;
    static Dataset load_cache(const std::filesystem::path& dir);

private:
    std::vector<LabeledImage> images_;
    LabelSpace space_;
    std::vector<double> labels_norm_;
    std::vector<double> labels_raw_;
    std::map<double, std::vector<std::size_t>> by_raw_;
};

enum class SyntheticKind { rotated_bar, gabor };

SyntheticKind synthetic_kind_from_string(const std::string& s);

// Procedurally generated corpus whose regression label is the orientation of
// the rendered structure, in degrees within [-80, 80]. `imbalance` > 0 skews
// label draws geometrically toward the low end. `distinct` > 0 snaps labels
// to that many evenly spaced raw values (an integer-valued label space when
// the grid lands on integers), 0 keeps them strictly continuous.
Dataset make_synthetic(SyntheticKind kind, std::size_t n, int resolution, double imbalance,
                       std::uint64_t seed, int distinct = 0);

struct FolderOptions {
    int resolution = 32;
    int channels = 1;  // 1 = luma, 3 = RGB
    std::optional<std::pair<double, double>> bounds;
    std::optional<LabelKind> kind_override;
};

struct FolderLoadReport {
    std::size_t loaded = 0;
    std::size_t skipped_missing = 0;
    std::size_t skipped_bad_label = 0;
    std::vector<std::string> warnings;
};

// Loads PGM/PPM images listed in a delimited labels file
// (`filename<TAB or comma>raw_label`, '#' comments). Unparseable rows are
// skipped with a per-row warning; the load fails only if nothing survives.
Dataset load_folder(const std::filesystem::path& dir, const std::filesystem::path& labels_file,
                    const FolderOptions& options, FolderLoadReport* report = nullptr);

}  // namespace ccgm::data
