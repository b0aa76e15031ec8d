#include "ccgm/niqe/niqe.hpp"

#include <array>
#include <cmath>
#include <mutex>

#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/stats.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::niqe {

void NiqeSettings::validate() const {
    if (patch_size < 8 || patch_size % 2 != 0)
        throw ConfigError("niqe patch_size must be an even number >= 8");
    if (sharpness_quantile < 0.0 || sharpness_quantile >= 1.0)
        throw ConfigError("niqe sharpness_quantile must lie in [0,1)");
    if (scales != 2) throw ConfigError("niqe scales is fixed at 2");
}

Eigen::MatrixXd to_gray255(const Tensor& image) {
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    Eigen::MatrixXd gray(H, W);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            double luma;
            if (C >= 3) {
                luma = 0.299 * image(0, y, x) + 0.587 * image(1, y, x) + 0.114 * image(2, y, x);
            } else {
                luma = image(0, y, x);
            }
            gray(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) =
                (luma + 1.0) * 127.5;
        }
    }
    return gray;
}

namespace {

constexpr int kWin = 7;

const std::array<double, kWin>& gaussian_kernel() {
    static const std::array<double, kWin> k = [] {
        std::array<double, kWin> g{};
        const double sigma = 7.0 / 6.0;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = static_cast<double>(i - kWin / 2);
            g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += g[i];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return k;
}

// Separable 7-tap Gaussian blur with replicate borders.
Eigen::MatrixXd gauss_blur(const Eigen::MatrixXd& in) {
    const auto& k = gaussian_kernel();
    const Eigen::Index H = in.rows(), W = in.cols();
    Eigen::MatrixXd tmp(H, W), out(H, W);
    for (Eigen::Index y = 0; y < H; ++y) {
        for (Eigen::Index x = 0; x < W; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWin; ++t) {
                Eigen::Index xx = std::clamp<Eigen::Index>(x + t - kWin / 2, 0, W - 1);
                s += k[static_cast<std::size_t>(t)] * in(y, xx);
            }
            tmp(y, x) = s;
        }
    }
    for (Eigen::Index y = 0; y < H; ++y) {
        for (Eigen::Index x = 0; x < W; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWin; ++t) {
                Eigen::Index yy = std::clamp<Eigen::Index>(y + t - kWin / 2, 0, H - 1);
                s += k[static_cast<std::size_t>(t)] * tmp(yy, x);
            }
            out(y, x) = s;
        }
    }
    return out;
}

struct MscnMaps {
    Eigen::MatrixXd mscn;
    Eigen::MatrixXd sigma;  // local std, used for sharpness ranking
};

MscnMaps mscn_with_sigma(const Eigen::MatrixXd& gray) {
    if (gray.rows() < kWin || gray.cols() < kWin)
        throw DomainError("mscn: image smaller than the 7x7 window");
    const Eigen::MatrixXd mu = gauss_blur(gray);
    const Eigen::MatrixXd musq = mu.array().square();
    const Eigen::MatrixXd second = gauss_blur(gray.array().square().matrix());
    MscnMaps maps;
    maps.sigma = (second - musq).array().max(0.0).sqrt();
    maps.mscn = (gray - mu).array() / (maps.sigma.array() + 1.0);
    return maps;
}

// 2x2 average pooling (truncates odd trailing row/col).
Eigen::MatrixXd downsample2(const Eigen::MatrixXd& in) {
    const Eigen::Index H = in.rows() / 2, W = in.cols() / 2;
    Eigen::MatrixXd out(H, W);
    for (Eigen::Index y = 0; y < H; ++y)
        for (Eigen::Index x = 0; x < W; ++x)
            out(y, x) =
                0.25 * (in(2 * y, 2 * x) + in(2 * y + 1, 2 * x) + in(2 * y, 2 * x + 1) +
                        in(2 * y + 1, 2 * x + 1));
    return out;
}

// Precomputed r(alpha) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)) over the grid.
struct AlphaGrid {
    std::vector<double> alpha;
    std::vector<double> ratio;
};

const AlphaGrid& alpha_grid() {
    static const AlphaGrid grid = [] {
        AlphaGrid g;
        for (int i = 0;; ++i) {
            const double a = 0.2 + 0.001 * static_cast<double>(i);
            if (a > 10.0 + 1e-12) break;
            const double r =
                std::tgamma(2.0 / a) * std::tgamma(2.0 / a) /
                (std::tgamma(1.0 / a) * std::tgamma(3.0 / a));
            g.alpha.push_back(a);
            g.ratio.push_back(r);
        }
        return g;
    }();
    return grid;
}

double gamma_ratio_13(double alpha) {
    return std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha);
}

}  // namespace

Eigen::MatrixXd mscn(const Eigen::MatrixXd& gray) { return mscn_with_sigma(gray).mscn; }

AggdParams fit_aggd(std::span<const double> samples) {
    if (samples.size() < 16) throw DomainError("fit_aggd: need at least 16 samples");
    double neg_sq = 0.0, pos_sq = 0.0, abs_sum = 0.0;
    std::size_t neg_n = 0, pos_n = 0;
    for (double x : samples) {
        if (x < 0.0) {
            neg_sq += x * x;
            ++neg_n;
            abs_sum -= x;
        } else if (x > 0.0) {
            pos_sq += x * x;
            ++pos_n;
            abs_sum += x;
        }
    }
    if (neg_sq + pos_sq == 0.0) throw DegenerateInputError("fit_aggd: all samples are zero");

    const auto n = static_cast<double>(samples.size());
    const double sigma_l = neg_n ? std::sqrt(neg_sq / static_cast<double>(neg_n)) : 0.0;
    const double sigma_r = pos_n ? std::sqrt(pos_sq / static_cast<double>(pos_n)) : 0.0;
    double gamma_hat;
    if (sigma_r > 0.0) {
        gamma_hat = sigma_l / sigma_r;
    } else {
        gamma_hat = 1e12;  // single-sided sample
    }
    const double r_hat = (abs_sum / n) * (abs_sum / n) / ((neg_sq + pos_sq) / n);
    const double g2 = gamma_hat * gamma_hat;
    const double r_hat_norm =
        r_hat * (gamma_hat * g2 + 1.0) * (gamma_hat + 1.0) / ((g2 + 1.0) * (g2 + 1.0));

    const auto& grid = alpha_grid();
    std::size_t best = 0;
    double best_diff = std::abs(grid.ratio[0] - r_hat_norm);
    for (std::size_t i = 1; i < grid.ratio.size(); ++i) {
        const double diff = std::abs(grid.ratio[i] - r_hat_norm);
        if (diff < best_diff) {
            best_diff = diff;
            best = i;
        }
    }
    const double alpha = grid.alpha[best];
    const double conv = std::sqrt(gamma_ratio_13(alpha));
    return AggdParams{alpha, sigma_l * conv, sigma_r * conv};
}

namespace {

// 18 features of one spatial region of an MSCN map: AGGD of the coefficients
// (alpha, mean sigma^2), then (alpha, eta, sigma_l^2, sigma_r^2) for the four
// pairwise products H, V, D1, D2.
bool region_features(const Eigen::MatrixXd& m, Eigen::Index r0, Eigen::Index c0, Eigen::Index side,
                     double* out) {
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(side * side));
    for (Eigen::Index r = r0; r < r0 + side; ++r)
        for (Eigen::Index c = c0; c < c0 + side; ++c) vals.push_back(m(r, c));

    AggdParams p{};
    try {
        p = fit_aggd(vals);
    } catch (const DegenerateInputError&) {
        return false;
    }
    const double g13 = 1.0 / gamma_ratio_13(p.alpha);  // Gamma(3/a)/Gamma(1/a)
    const double sl2 = p.beta_left * p.beta_left * g13;
    const double sr2 = p.beta_right * p.beta_right * g13;
    out[0] = p.alpha;
    out[1] = 0.5 * (sl2 + sr2);

    static constexpr int shifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    int k = 2;
    for (const auto& sh : shifts) {
        std::vector<double> prod;
        prod.reserve(static_cast<std::size_t>(side * side));
        for (Eigen::Index r = r0; r < r0 + side; ++r) {
            for (Eigen::Index c = c0; c < c0 + side; ++c) {
                const Eigen::Index rr = r + sh[0], cc = c + sh[1];
                if (rr < r0 + side && cc >= c0 && cc < c0 + side)
                    prod.push_back(m(r, c) * m(rr, cc));
            }
        }
        AggdParams q{};
        try {
            q = fit_aggd(prod);
        } catch (const DegenerateInputError&) {
            return false;
        }
        const double qg13 = 1.0 / gamma_ratio_13(q.alpha);
        const double qsl2 = q.beta_left * q.beta_left * qg13;
        const double qsr2 = q.beta_right * q.beta_right * qg13;
        const double eta =
            (q.beta_right - q.beta_left) * std::tgamma(2.0 / q.alpha) / std::tgamma(1.0 / q.alpha);
        out[k++] = q.alpha;
        out[k++] = eta;
        out[k++] = qsl2;
        out[k++] = qsr2;
    }
    return true;
}

}  // namespace

Eigen::MatrixXd niqe_features(const Eigen::MatrixXd& gray, const NiqeSettings& settings) {
    settings.validate();
    const Eigen::Index P = settings.patch_size;
    const Eigen::Index rows = gray.rows() / P;
    const Eigen::Index cols = gray.cols() / P;
    if (rows == 0 || cols == 0)
        throw DegenerateInputError("niqe_features: image smaller than one patch");

    const MscnMaps base = mscn_with_sigma(gray);
    const Eigen::MatrixXd half = downsample2(gray);
    const Eigen::MatrixXd half_mscn = mscn_with_sigma(half).mscn;

    // Sharpness = mean local std per base patch; patches below the requested
    // quantile are dropped.
    std::vector<double> sharpness;
    sharpness.reserve(static_cast<std::size_t>(rows * cols));
    for (Eigen::Index pr = 0; pr < rows; ++pr)
        for (Eigen::Index pc = 0; pc < cols; ++pc)
            sharpness.push_back(base.sigma.block(pr * P, pc * P, P, P).mean());
    double threshold = -1.0;
    if (settings.sharpness_quantile > 0.0)
        threshold = quantile_linear(sharpness, settings.sharpness_quantile);

    std::vector<std::array<double, 2 * kFeaturesPerScale>> rows_out;
    for (Eigen::Index pr = 0; pr < rows; ++pr) {
        for (Eigen::Index pc = 0; pc < cols; ++pc) {
            if (sharpness[static_cast<std::size_t>(pr * cols + pc)] < threshold) continue;
            std::array<double, 2 * kFeaturesPerScale> feat{};
            if (!region_features(base.mscn, pr * P, pc * P, P, feat.data())) continue;
            if (!region_features(half_mscn, pr * P / 2, pc * P / 2, P / 2,
                                 feat.data() + kFeaturesPerScale))
                continue;
            rows_out.push_back(feat);
        }
    }
    if (rows_out.empty()) throw DegenerateInputError("niqe_features: no surviving patches");

    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows_out.size()), 2 * kFeaturesPerScale);
    for (std::size_t i = 0; i < rows_out.size(); ++i)
        for (int j = 0; j < 2 * kFeaturesPerScale; ++j)
            out(static_cast<Eigen::Index>(i), j) = rows_out[i][static_cast<std::size_t>(j)];
    return out;
}

Eigen::MatrixXd niqe_features(const Tensor& image, const NiqeSettings& settings) {
    return niqe_features(to_gray255(image), settings);
}

NiqeModel fit_niqe_model(const data::Dataset& dataset, const NiqeSettings& settings) {
    settings.validate();
    if (dataset.size() < 50) throw DomainError("fit_niqe_model: need at least 50 images");

    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index total = 0;
    std::uint64_t corpus_hash = 1469598103934665603ULL;
    for (const auto& im : dataset.images()) {
        blocks.push_back(niqe_features(im.pixels, settings));
        total += blocks.back().rows();
        const auto bytes = std::as_bytes(im.pixels.flat());
        corpus_hash ^= persist::fnv1a64(
            {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
        corpus_hash *= 1099511628211ULL;
    }

    Eigen::MatrixXd all(total, 2 * kFeaturesPerScale);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        all.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    if (total < 2) throw DomainError("fit_niqe_model: not enough surviving patches");

    NiqeModel model;
    model.settings = settings;
    model.feature_mean = all.colwise().mean();
    const Eigen::MatrixXd centered = all.rowwise() - model.feature_mean.transpose();
    model.feature_cov =
        (centered.transpose() * centered) / static_cast<double>(total - 1);
    // Enforce exact symmetry against accumulation roundoff.
    model.feature_cov = 0.5 * (model.feature_cov + model.feature_cov.transpose()).eval();
    if (model.feature_cov.norm() == 0.0) throw DomainError("fit_niqe_model: rank-0 covariance");

    nlohmann::json manifest;
    manifest["corpus_hash"] = corpus_hash;
    manifest["images"] = dataset.size();
    manifest["patches"] = total;
    manifest["patch_size"] = settings.patch_size;
    manifest["sharpness_quantile"] = settings.sharpness_quantile;
    manifest["scales"] = settings.scales;
    model.fit_manifest = manifest.dump();
    return model;
}

double niqe_score(const NiqeModel& model, const Eigen::MatrixXd& gray) {
    NiqeSettings score_settings = model.settings;
    score_settings.sharpness_quantile = 0.0;  // all full patches at test time
    Eigen::MatrixXd feats;
    try {
        feats = niqe_features(gray, score_settings);
    } catch (const DegenerateInputError& e) {
        throw ScoreError(std::string("niqe_score: ") + e.what());
    } catch (const DomainError& e) {
        throw ScoreError(std::string("niqe_score: ") + e.what());
    }

    const Eigen::Index n = feats.rows();
    const Eigen::VectorXd mean_t = feats.colwise().mean();
    Eigen::MatrixXd cov_t = Eigen::MatrixXd::Zero(feats.cols(), feats.cols());
    if (n > 1) {
        const Eigen::MatrixXd centered = feats.rowwise() - mean_t.transpose();
        cov_t = (centered.transpose() * centered) / static_cast<double>(n - 1);
    }

    const Eigen::VectorXd d = model.feature_mean - mean_t;
    Eigen::MatrixXd avg = 0.5 * (model.feature_cov + cov_t);
    avg.diagonal().array() += 1e-6;
    avg = 0.5 * (avg + avg.transpose()).eval();

    // Pseudo-inverse through the symmetric eigendecomposition; tiny and
    // negative eigenvalues contribute nothing.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(avg);
    if (eig.info() != Eigen::Success) throw ScoreError("niqe_score: eigendecomposition failed");
    const Eigen::VectorXd evals = eig.eigenvalues();
    const double cutoff = evals.cwiseAbs().maxCoeff() * 1e-12;
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * d;
    double q = 0.0;
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals[i] > cutoff) q += proj[i] * proj[i] / evals[i];
    if (!std::isfinite(q)) throw ScoreError("niqe_score: non-finite quadratic form");
    return std::sqrt(std::max(q, 0.0));
}

double niqe_score(const NiqeModel& model, const Tensor& image) {
    return niqe_score(model, to_gray255(image));
}

void NiqeModel::save(const std::filesystem::path& path) const {
    persist::ArtifactWriter w(persist::kNiqeModelMagic);
    w.manifest()["fit_manifest"] = nlohmann::json::parse(fit_manifest.empty() ? "{}" : fit_manifest);
    w.manifest()["patch_size"] = settings.patch_size;
    w.manifest()["sharpness_quantile"] = settings.sharpness_quantile;
    w.manifest()["scales"] = settings.scales;
    const std::size_t dim = static_cast<std::size_t>(feature_mean.size());
    w.add_f64("mean", {feature_mean.data(), dim}, {dim});
    w.add_f64("cov", {feature_cov.data(), dim * dim}, {dim, dim});
    w.write(path);
}

NiqeModel NiqeModel::load(const std::filesystem::path& path) {
    auto r = persist::ArtifactReader::open(path, persist::kNiqeModelMagic);
    NiqeModel m;
    m.settings.patch_size = r.manifest().at("patch_size").get<int>();
    m.settings.sharpness_quantile = r.manifest().at("sharpness_quantile").get<double>();
    m.settings.scales = r.manifest().at("scales").get<int>();
    m.fit_manifest = r.manifest().at("fit_manifest").dump();
    const auto mean = r.f64("mean");
    const auto cov = r.f64("cov");
    const auto dim = static_cast<Eigen::Index>(mean.size());
    m.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
    m.feature_cov = Eigen::Map<const Eigen::MatrixXd>(cov.data(), dim, dim);
    return m;
}

}  // namespace ccgm::niqe
