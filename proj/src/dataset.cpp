#include "ccgm/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/rng.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::data {

std::string to_string(LabelKind kind) {
    return kind == LabelKind::integer_valued ? "integer_valued" : "strictly_continuous";
}

LabelKind label_kind_from_string(const std::string& s) {
    if (s == "integer_valued") return LabelKind::integer_valued;
    if (s == "strictly_continuous") return LabelKind::strictly_continuous;
    throw ConfigError("unknown label kind: " + s);
}

LabelSpace::LabelSpace(double raw_min, double raw_max, LabelKind kind,
                       std::vector<double> distinct_labels_norm)
    : raw_min_(raw_min), raw_max_(raw_max), kind_(kind), distinct_(std::move(distinct_labels_norm)) {
    if (!(raw_min_ < raw_max_)) throw DomainError("label space requires raw_min < raw_max");
    for (std::size_t i = 0; i < distinct_.size(); ++i) {
        if (distinct_[i] < 0.0 || distinct_[i] > 1.0)
            throw DomainError("distinct label outside [0,1]");
        if (i > 0 && !(distinct_[i - 1] < distinct_[i]))
            throw DomainError("distinct labels must be strictly increasing");
    }
}

LabelSpace LabelSpace::from_raw_labels(std::span<const double> raw,
                                       std::optional<std::pair<double, double>> bounds,
                                       std::optional<LabelKind> kind_override) {
    if (raw.empty()) throw DomainError("cannot build a label space from no labels");
    double lo, hi;
    if (bounds) {
        lo = bounds->first;
        hi = bounds->second;
    } else {
        lo = *std::min_element(raw.begin(), raw.end());
        hi = *std::max_element(raw.begin(), raw.end());
    }
    if (!(lo < hi)) throw DomainError("degenerate label range: min == max");

    LabelKind kind;
    if (kind_override) {
        kind = *kind_override;
    } else {
        bool all_int = std::all_of(raw.begin(), raw.end(), [](double v) {
            return std::abs(v - std::round(v)) < 1e-9;
        });
        kind = all_int ? LabelKind::integer_valued : LabelKind::strictly_continuous;
    }

    std::set<double> distinct_raw(raw.begin(), raw.end());
    std::vector<double> distinct_norm;
    distinct_norm.reserve(distinct_raw.size());
    for (double v : distinct_raw) distinct_norm.push_back((v - lo) / (hi - lo));
    return LabelSpace(lo, hi, kind, std::move(distinct_norm));
}

Dataset::Dataset(std::vector<LabeledImage> images, LabelSpace space)
    : images_(std::move(images)), space_(std::move(space)) {
    if (images_.empty()) throw DomainError("dataset must be nonempty");
    labels_norm_.reserve(images_.size());
    labels_raw_.reserve(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) {
        const auto& im = images_[i];
        if (std::abs(im.label_norm - space_.normalize(im.label_raw)) > 1e-12)
            throw DomainError("image label_norm inconsistent with label space");
        labels_norm_.push_back(im.label_norm);
        labels_raw_.push_back(im.label_raw);
        by_raw_[im.label_raw].push_back(i);
    }
}

const std::vector<std::size_t>& Dataset::indices_with_raw_label(double raw) const {
    auto it = by_raw_.find(raw);
    if (it == by_raw_.end()) throw DomainError("no image carries the requested raw label");
    return it->second;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "rotated_bar") return SyntheticKind::rotated_bar;
    if (s == "gabor") return SyntheticKind::gabor;
    throw ConfigError("unknown synthetic kind: " + s);
}

namespace {

constexpr double kRawMinDeg = -80.0;
constexpr double kRawMaxDeg = 80.0;

double smooth_coverage(double signed_dist, double edge) {
    // 1 inside, 0 outside, linear ramp of width `edge` across the boundary.
    double t = signed_dist / edge + 0.5;
    return std::clamp(t, 0.0, 1.0);
}

void render_rotated_bar(Tensor& px, double theta_deg, double thickness, double contrast) {
    const double theta = theta_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const std::size_t H = px.dim(1), W = px.dim(2);
    const double half = static_cast<double>(W) / 2.0;
    const double edge = 2.0 / static_cast<double>(W);
    const double bar_len = 0.80;
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double u = (static_cast<double>(x) + 0.5 - half) / half;
            const double v = (static_cast<double>(y) + 0.5 - half) / half;
            const double d_par = std::abs(u * c + v * s);
            const double d_perp = std::abs(-u * s + v * c);
            const double cov = smooth_coverage(thickness - d_perp, edge) *
                               smooth_coverage(bar_len - d_par, edge);
            px(0, y, x) = static_cast<float>(-1.0 + 2.0 * contrast * cov);
        }
    }
}

void render_gabor(Tensor& px, double theta_deg, double frequency, double contrast) {
    const double theta = theta_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const std::size_t H = px.dim(1), W = px.dim(2);
    const double half = static_cast<double>(W) / 2.0;
    const double envelope_sigma = 0.45;
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double u = (static_cast<double>(x) + 0.5 - half) / half;
            const double v = (static_cast<double>(y) + 0.5 - half) / half;
            const double along = u * c + v * s;
            const double r2 = u * u + v * v;
            const double g = std::exp(-r2 / (2.0 * envelope_sigma * envelope_sigma));
            const double val = contrast * g * std::cos(2.0 * std::numbers::pi * frequency * along);
            px(0, y, x) = static_cast<float>(val);
        }
    }
}

}  // namespace

Dataset make_synthetic(SyntheticKind kind, std::size_t n, int resolution, double imbalance,
                       std::uint64_t seed, int distinct) {
    if (n < 100) throw ConfigError("make_synthetic requires n >= 100");
    if (resolution != 16 && resolution != 32 && resolution != 64)
        throw ConfigError("make_synthetic resolution must be one of {16, 32, 64}");
    if (imbalance < 0.0) throw ConfigError("imbalance must be >= 0");
    if (distinct == 1 || distinct < 0) throw ConfigError("distinct must be 0 or >= 2");

    const auto R = static_cast<std::size_t>(resolution);
    std::vector<LabeledImage> images;
    images.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        Rng label_rng = Rng::derive(seed, {0x6c61626cULL, i});
        Rng shape_rng = Rng::derive(seed, {0x73686170ULL, i});
        Rng noise_rng = Rng::derive(seed, {0x6e6f6973ULL, i});

        // Geometric skew toward the low end of the range when imbalance > 0.
        double u = std::pow(label_rng.uniform(), 1.0 + imbalance);
        double raw;
        if (distinct > 0) {
            const double step = (kRawMaxDeg - kRawMinDeg) / static_cast<double>(distinct - 1);
            const auto j = static_cast<int>(std::lround(u * static_cast<double>(distinct - 1)));
            raw = kRawMinDeg + step * static_cast<double>(j);
        } else {
            raw = kRawMinDeg + u * (kRawMaxDeg - kRawMinDeg);
        }

        LabeledImage im;
        im.pixels = Tensor({1, R, R});
        im.label_raw = raw;
        im.label_norm = (raw - kRawMinDeg) / (kRawMaxDeg - kRawMinDeg);
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "img%06zu", i);
            im.id = buf;
        }

        const double contrast = shape_rng.uniform(0.60, 1.00);
        const double noise_sigma = shape_rng.uniform(0.02, 0.08);
        double thickness;
        if (kind == SyntheticKind::rotated_bar) {
            thickness = shape_rng.uniform(0.08, 0.28);
            render_rotated_bar(im.pixels, raw, thickness, contrast);
        } else {
            thickness = shape_rng.uniform(2.0, 4.0);  // stripe frequency
            render_gabor(im.pixels, raw, thickness, contrast);
        }
        im.attrs["thickness"] = thickness;
        im.attrs["contrast"] = contrast;
        im.attrs["noise_sigma"] = noise_sigma;

        for (auto& p : im.pixels.flat()) {
            const double noisy = p + noise_sigma * noise_rng.normal();
            p = static_cast<float>(std::clamp(noisy, -1.0, 1.0));
        }
        images.push_back(std::move(im));
    }

    std::vector<double> raws;
    raws.reserve(n);
    for (const auto& im : images) raws.push_back(im.label_raw);
    auto space = LabelSpace::from_raw_labels(
        raws, std::make_pair(kRawMinDeg, kRawMaxDeg),
        distinct > 0 ? std::optional<LabelKind>{} : std::optional<LabelKind>{LabelKind::strictly_continuous});
    return Dataset(std::move(images), std::move(space));
}

// ---------------------------------------------------------------------------
// Cache

void Dataset::save_cache(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const std::size_t N = images_.size();
    const std::size_t C = channels(), H = height(), W = width();
    std::vector<float> all(N * C * H * W);
    for (std::size_t i = 0; i < N; ++i) {
        const auto& px = images_[i].pixels;
        std::copy(px.flat().begin(), px.flat().end(), all.begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
    }
    const std::size_t dims[4] = {N, C, H, W};
    persist::write_tensor_block(dir / "images.bin", all, dims);

    nlohmann::json m;
    m["version"] = persist::kFormatVersion;
    m["label_space"] = {{"raw_min", space_.raw_min()},
                        {"raw_max", space_.raw_max()},
                        {"kind", to_string(space_.kind())}};
    nlohmann::json ids = nlohmann::json::array();
    nlohmann::json raw = nlohmann::json::array();
    for (const auto& im : images_) {
        ids.push_back(im.id);
        raw.push_back(im.label_raw);
    }
    m["ids"] = ids;
    m["labels_raw"] = raw;
    nlohmann::json attrs = nlohmann::json::object();
    if (!images_.empty()) {
        for (const auto& [key, _] : images_.front().attrs) {
            nlohmann::json col = nlohmann::json::array();
            for (const auto& im : images_) col.push_back(im.attrs.at(key));
            attrs[key] = col;
        }
    }
    m["attrs"] = attrs;
    persist::write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

Dataset Dataset::load_cache(const std::filesystem::path& dir) {
    auto m = nlohmann::json::parse(persist::read_text_file(dir / "manifest.json"));
    auto [data, dims] = persist::read_tensor_block(dir / "images.bin");
    if (dims.size() != 4) throw FormatError("dataset tensor block must be 4-D");
    const std::size_t N = dims[0], C = dims[1], H = dims[2], W = dims[3];
    const auto& ids = m.at("ids");
    const auto& raw = m.at("labels_raw");
    if (ids.size() != N || raw.size() != N)
        throw FormatError("dataset manifest row count disagrees with tensor block");

    const double lo = m.at("label_space").at("raw_min").get<double>();
    const double hi = m.at("label_space").at("raw_max").get<double>();
    const auto kind = label_kind_from_string(m.at("label_space").at("kind").get<std::string>());

    std::vector<LabeledImage> images(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto& im = images[i];
        im.pixels = Tensor({C, H, W});
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(i * C * H * W), C * H * W,
                    im.pixels.flat().begin());
        im.id = ids[i].get<std::string>();
        im.label_raw = raw[i].get<double>();
        im.label_norm = (im.label_raw - lo) / (hi - lo);
    }
    for (const auto& [key, col] : m.at("attrs").items()) {
        for (std::size_t i = 0; i < N; ++i) images[i].attrs[key] = col[i].get<double>();
    }

    std::vector<double> raws;
    raws.reserve(N);
    for (const auto& im : images) raws.push_back(im.label_raw);
    auto space = LabelSpace::from_raw_labels(raws, std::make_pair(lo, hi), kind);
    return Dataset(std::move(images), std::move(space));
}

}  // namespace ccgm::data
