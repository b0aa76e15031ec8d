#include "ccgm/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/stats.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::eval {

// ---------------------------------------------------------------------------
// FID

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
    return 0.5 * (cov + cov.transpose());
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) throw DomainError("fid: feature dimension mismatch");
    if (a.rows() < 2 || b.rows() < 2) throw DomainError("fid: need at least two samples per side");
    if (!a.allFinite() || !b.allFinite()) throw DomainError("fid: non-finite features");

    const Eigen::VectorXd mu_a = a.colwise().mean();
    const Eigen::VectorXd mu_b = b.colwise().mean();
    const Eigen::MatrixXd ca = sample_covariance(a, mu_a);
    const Eigen::MatrixXd cb = sample_covariance(b, mu_b);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(ca);
    if (eig_a.info() != Eigen::Success) throw DomainError("fid: eigendecomposition failed");
    Eigen::VectorXd ea = eig_a.eigenvalues();
    for (Eigen::Index i = 0; i < ea.size(); ++i) {
        if (ea[i] < -1e-6) throw DomainError("fid: covariance has a significantly negative eigenvalue");
        ea[i] = std::sqrt(std::max(ea[i], 0.0));
    }
    const Eigen::MatrixXd sqrt_a =
        eig_a.eigenvectors() * ea.asDiagonal() * eig_a.eigenvectors().transpose();

    Eigen::MatrixXd prod = sqrt_a * cb * sqrt_a;
    prod = 0.5 * (prod + prod.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_p(prod);
    if (eig_p.info() != Eigen::Success) throw DomainError("fid: eigendecomposition failed");
    double tr_sqrt = 0.0;
    for (Eigen::Index i = 0; i < eig_p.eigenvalues().size(); ++i) {
        const double ev = eig_p.eigenvalues()[i];
        if (ev < -1e-6) throw DomainError("fid: product matrix has a significantly negative eigenvalue");
        tr_sqrt += std::sqrt(std::max(ev, 0.0));
    }

    const double value =
        (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    return std::max(value, 0.0);
}

// ---------------------------------------------------------------------------
// EvalNet

EvalNet::EvalNet(std::size_t in_channels, std::size_t resolution, std::size_t head_dim,
                 std::uint64_t seed)
    : head_dim_(head_dim) {
    Rng rng = Rng::derive(seed, {0x6576616cULL});
    c1_ = nn::Conv2d<float>("e.c1", in_channels, 16, 3, 2, 1, rng);
    c2_ = nn::Conv2d<float>("e.c2", 16, 32, 3, 2, 1, rng);
    c3_ = nn::Conv2d<float>("e.c3", 32, kFeatureDim, 3, 2, 1, rng);
    head_ = nn::Linear<float>("e.head", kFeatureDim, head_dim, rng);
    (void)resolution;
}

TensorT<float> EvalNet::forward(const TensorT<float>& images) {
    TensorT<float> x = a1_.forward(c1_.forward(images));
    x = a2_.forward(c2_.forward(x));
    x = a3_.forward(c3_.forward(x));
    const std::size_t n = x.dim(0), f = x.dim(1);
    feat_h_ = x.dim(2);
    feat_w_ = x.dim(3);
    const std::size_t hw = feat_h_ * feat_w_;
    feat_ = TensorT<float>({n, f});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < f; ++c) {
            float acc = 0.0f;
            const float* p = x.data() + (s * f + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += p[i];
            feat_[s * f + c] = acc / static_cast<float>(hw);
        }
    return head_.forward(feat_);
}

void EvalNet::backward(const TensorT<float>& d_logits) {
    TensorT<float> df = head_.backward(d_logits);
    const std::size_t n = df.dim(0), f = df.dim(1);
    const std::size_t hw = feat_h_ * feat_w_;
    TensorT<float> d({n, f, feat_h_, feat_w_});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < f; ++c) {
            const float g = df[s * f + c] / static_cast<float>(hw);
            float* p = d.data() + (s * f + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) p[i] = g;
        }
    d = c3_.backward(a3_.backward(d), true);
    d = c2_.backward(a2_.backward(d), true);
    c1_.backward(a1_.backward(d), false);
}

std::vector<nn::Param<float>*> EvalNet::trainable_params() {
    std::vector<nn::Param<float>*> out;
    c1_.collect(out);
    c2_.collect(out);
    c3_.collect(out);
    head_.collect(out);
    return out;
}

void EvalNet::save_state(persist::ArtifactWriter& w, const std::string& prefix) const {
    auto* self = const_cast<EvalNet*>(this);
    for (auto* p : self->trainable_params()) w.add_f32(prefix + p->name, p->value.flat(), p->value.shape());
}

void EvalNet::load_state(const persist::ArtifactReader& r, const std::string& prefix) {
    for (auto* p : trainable_params()) {
        const auto data = r.f32(prefix + p->name);
        if (data.size() != p->value.numel())
            throw FormatError("eval model tensor size mismatch: " + p->name);
        std::copy(data.begin(), data.end(), p->value.flat().begin());
    }
}

// ---------------------------------------------------------------------------
// Training the evaluation models

namespace {

std::vector<double> quantile_bin_edges(std::vector<double> values, std::size_t bins) {
    std::vector<double> edges;
    for (std::size_t b = 1; b < bins; ++b)
        edges.push_back(quantile_linear(values, static_cast<double>(b) / static_cast<double>(bins)));
    return edges;
}

int bin_of(double v, const std::vector<double>& edges) {
    int b = 0;
    for (double e : edges) {
        if (v > e) ++b;
    }
    return b;
}

TensorT<float> gather_batch(const data::Dataset& ds, std::span<const std::size_t> idx) {
    const std::size_t C = ds.channels(), H = ds.height(), W = ds.width();
    TensorT<float> out({idx.size(), C, H, W});
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(ds.image(idx[i]).pixels.flat().begin(), ds.image(idx[i]).pixels.flat().end(),
                  out.flat().begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
    return out;
}

void train_classifier(EvalNet& net, const data::Dataset& ds, const std::vector<int>& classes,
                      const EvalTrainSettings& s, std::uint64_t seed) {
    nn::Adam<float> opt(net.trainable_params(), s.lr, 0.9, 0.999);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    const auto k = net.head_dim();
    for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(seed, {0x73687566ULL, epoch});
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
        for (std::size_t at = 0; at + 1 < order.size(); at += s.batch) {
            const std::size_t n = std::min(s.batch, order.size() - at);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(at),
                                         order.begin() + static_cast<std::ptrdiff_t>(at + n));
            opt.zero_grad();
            TensorT<float> logits = net.forward(gather_batch(ds, idx));
            TensorT<float> dlogits({n, k});
            for (std::size_t i = 0; i < n; ++i) {
                double mx = -1e30;
                for (std::size_t c = 0; c < k; ++c)
                    mx = std::max(mx, static_cast<double>(logits[i * k + c]));
                double z = 0.0;
                for (std::size_t c = 0; c < k; ++c) z += std::exp(logits[i * k + c] - mx);
                for (std::size_t c = 0; c < k; ++c) {
                    const double p = std::exp(logits[i * k + c] - mx) / z;
                    const double target = classes[idx[i]] == static_cast<int>(c) ? 1.0 : 0.0;
                    dlogits[i * k + c] = static_cast<float>((p - target) / static_cast<double>(n));
                }
            }
            net.backward(dlogits);
            opt.step();
        }
    }
}

void train_regressor(EvalNet& net, const data::Dataset& ds, const EvalTrainSettings& s,
                     std::uint64_t seed) {
    nn::Adam<float> opt(net.trainable_params(), s.lr, 0.9, 0.999);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(seed, {0x72656773ULL, epoch});
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
        for (std::size_t at = 0; at + 1 < order.size(); at += s.batch) {
            const std::size_t n = std::min(s.batch, order.size() - at);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(at),
                                         order.begin() + static_cast<std::ptrdiff_t>(at + n));
            opt.zero_grad();
            TensorT<float> pred = net.forward(gather_batch(ds, idx));
            TensorT<float> dpred({n, 1});
            for (std::size_t i = 0; i < n; ++i) {
                const double err = pred[i] - ds.image(idx[i]).label_norm;
                dpred[i] = static_cast<float>(2.0 * err / static_cast<double>(n));
            }
            net.backward(dpred);
            opt.step();
        }
    }
}

}  // namespace

EvalModels train_eval_models(const data::Dataset& ds, const EvalTrainSettings& s,
                             std::uint64_t seed) {
    EvalModels m;
    m.extractor = EvalNet(ds.channels(), ds.height(), s.bins, Rng::splitmix64(seed ^ 1));
    m.regressor = EvalNet(ds.channels(), ds.height(), 1, Rng::splitmix64(seed ^ 2));
    m.classifier = EvalNet(ds.channels(), ds.height(), s.bins, Rng::splitmix64(seed ^ 3));

    m.label_bin_edges = quantile_bin_edges(ds.labels_norm(), s.bins);
    std::vector<int> label_classes(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        label_classes[i] = bin_of(ds.labels_norm()[i], m.label_bin_edges);
    train_classifier(m.extractor, ds, label_classes, s, seed ^ 0xE1);

    train_regressor(m.regressor, ds, s, seed ^ 0xE2);

    const bool has_attr = ds.image(0).attrs.count("thickness") > 0;
    if (has_attr) {
        m.attr_name = "thickness";
        std::vector<double> attr(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) attr[i] = ds.image(i).attrs.at("thickness");
        m.attr_bin_edges = quantile_bin_edges(attr, s.bins);
        std::vector<int> attr_classes(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) attr_classes[i] = bin_of(attr[i], m.attr_bin_edges);
        train_classifier(m.classifier, ds, attr_classes, s, seed ^ 0xE3);
    } else {
        m.attr_name.clear();
        m.attr_bin_edges = m.label_bin_edges;
        train_classifier(m.classifier, ds, label_classes, s, seed ^ 0xE3);
    }

    // Training-set MAE of the regressor, in raw units: the Label Score floor.
    const auto preds = predict_labels(m.regressor, ds.images());
    double mae = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double pred_raw = ds.label_space().denormalize(preds[i]);
        mae += std::abs(pred_raw - ds.image(i).label_raw);
    }
    m.regressor_floor_raw = mae / static_cast<double>(ds.size());
    return m;
}

Eigen::MatrixXd extract_features(EvalNet& net, std::span<const data::LabeledImage> images) {
    if (images.empty()) throw DomainError("extract_features: empty image set");
    const std::size_t C = images[0].pixels.dim(0), H = images[0].pixels.dim(1),
                      W = images[0].pixels.dim(2);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), EvalNet::kFeatureDim);
    const std::size_t chunk = 256;
    for (std::size_t at = 0; at < images.size(); at += chunk) {
        const std::size_t n = std::min(chunk, images.size() - at);
        TensorT<float> batch({n, C, H, W});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(images[at + i].pixels.flat().begin(), images[at + i].pixels.flat().end(),
                      batch.flat().begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
        net.forward(batch);
        const auto& f = net.features();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < EvalNet::kFeatureDim; ++c)
                out(static_cast<Eigen::Index>(at + i), static_cast<Eigen::Index>(c)) =
                    f[i * EvalNet::kFeatureDim + c];
    }
    return out;
}

std::vector<double> predict_labels(EvalNet& regressor, std::span<const data::LabeledImage> images) {
    std::vector<double> out(images.size());
    const std::size_t C = images[0].pixels.dim(0), H = images[0].pixels.dim(1),
                      W = images[0].pixels.dim(2);
    const std::size_t chunk = 256;
    for (std::size_t at = 0; at < images.size(); at += chunk) {
        const std::size_t n = std::min(chunk, images.size() - at);
        TensorT<float> batch({n, C, H, W});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(images[at + i].pixels.flat().begin(), images[at + i].pixels.flat().end(),
                      batch.flat().begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
        TensorT<float> pred = regressor.forward(batch);
        for (std::size_t i = 0; i < n; ++i) out[at + i] = pred[i];
    }
    return out;
}

std::vector<int> predict_classes(EvalNet& classifier, std::span<const data::LabeledImage> images) {
    std::vector<int> out(images.size());
    const std::size_t C = images[0].pixels.dim(0), H = images[0].pixels.dim(1),
                      W = images[0].pixels.dim(2);
    const std::size_t k = classifier.head_dim();
    const std::size_t chunk = 256;
    for (std::size_t at = 0; at < images.size(); at += chunk) {
        const std::size_t n = std::min(chunk, images.size() - at);
        TensorT<float> batch({n, C, H, W});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(images[at + i].pixels.flat().begin(), images[at + i].pixels.flat().end(),
                      batch.flat().begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
        TensorT<float> logits = classifier.forward(batch);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (logits[i * k + c] > logits[i * k + best]) best = static_cast<int>(c);
            out[at + i] = best;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

void EvalConfig::validate() const {
    if (centers.empty()) throw ConfigError("eval centers must be nonempty");
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (centers[i] < 0.0 || centers[i] > 1.0)
            throw ConfigError("eval centers must lie in [0,1]");
        if (i > 0 && centers[i] < centers[i - 1])
            throw ConfigError("eval centers must be sorted");
    }
    if (radius < 0.0) throw ConfigError("eval radius must be >= 0");
}

namespace {

std::vector<std::size_t> window_members(std::span<const data::LabeledImage> set, double center,
                                        double radius) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (std::abs(set[i].label_norm - center) <= radius) idx.push_back(i);
    return idx;
}

void finalize_series(PerCenterSeries& s) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (!s.skipped[i]) vals.push_back(s.values[i]);
    if (vals.empty()) throw EvalError("every center was skipped");
    s.mean = mean(vals);
    s.stddev = stddev(vals);
}

}  // namespace

PerCenterSeries sfid(EvalNet& extractor, std::span<const data::LabeledImage> real,
                     std::span<const data::LabeledImage> fake, const EvalConfig& config) {
    config.validate();
    const Eigen::MatrixXd real_f = extract_features(extractor, real);
    const Eigen::MatrixXd fake_f = extract_features(extractor, fake);

    PerCenterSeries out;
    out.centers_norm = config.centers;
    for (double c : config.centers) {
        const auto ri = window_members(real, c, config.radius);
        const auto fi = window_members(fake, c, config.radius);
        if (ri.size() < config.min_per_window || fi.size() < config.min_per_window) {
            out.values.push_back(std::numeric_limits<double>::quiet_NaN());
            out.skipped.push_back(true);
            continue;
        }
        Eigen::MatrixXd ra(static_cast<Eigen::Index>(ri.size()), real_f.cols());
        for (std::size_t i = 0; i < ri.size(); ++i)
            ra.row(static_cast<Eigen::Index>(i)) = real_f.row(static_cast<Eigen::Index>(ri[i]));
        Eigen::MatrixXd fa(static_cast<Eigen::Index>(fi.size()), fake_f.cols());
        for (std::size_t i = 0; i < fi.size(); ++i)
            fa.row(static_cast<Eigen::Index>(i)) = fake_f.row(static_cast<Eigen::Index>(fi[i]));
        out.values.push_back(fid(ra, fa));
        out.skipped.push_back(false);
    }
    finalize_series(out);
    return out;
}

LabelScoreResult label_score(EvalNet& regressor, std::span<const data::LabeledImage> fakes,
                             const data::LabelSpace& space, const EvalConfig& config) {
    config.validate();
    if (fakes.empty()) throw DomainError("label_score: empty fake set");
    const auto preds = predict_labels(regressor, fakes);

    LabelScoreResult r;
    std::vector<double> abs_err(fakes.size());
    for (std::size_t i = 0; i < fakes.size(); ++i) {
        const double pred_raw = space.denormalize(preds[i]);
        abs_err[i] = std::abs(pred_raw - fakes[i].label_raw);
    }
    r.mae_raw = mean(abs_err);

    r.per_center.centers_norm = config.centers;
    for (double c : config.centers) {
        const auto idx = window_members(fakes, c, std::max(config.radius, 1e-12));
        if (idx.empty()) {
            r.per_center.values.push_back(std::numeric_limits<double>::quiet_NaN());
            r.per_center.skipped.push_back(true);
            continue;
        }
        double s = 0.0;
        for (auto i : idx) s += abs_err[i];
        r.per_center.values.push_back(s / static_cast<double>(idx.size()));
        r.per_center.skipped.push_back(false);
    }
    finalize_series(r.per_center);
    return r;
}

PerCenterSeries diversity(EvalNet& classifier, std::span<const data::LabeledImage> fakes,
                          const EvalConfig& config) {
    config.validate();
    if (fakes.empty()) throw DomainError("diversity: empty fake set");
    const auto classes = predict_classes(classifier, fakes);
    const std::size_t k = classifier.head_dim();

    PerCenterSeries out;
    out.centers_norm = config.centers;
    for (double c : config.centers) {
        const auto idx = window_members(fakes, c, std::max(config.radius, 1e-12));
        if (idx.empty()) {
            out.values.push_back(std::numeric_limits<double>::quiet_NaN());
            out.skipped.push_back(true);
            continue;
        }
        std::vector<double> hist(k, 0.0);
        for (auto i : idx) hist[static_cast<std::size_t>(classes[i])] += 1.0;
        double entropy = 0.0;
        for (double h : hist) {
            if (h > 0.0) {
                const double p = h / static_cast<double>(idx.size());
                entropy -= p * std::log(p);
            }
        }
        out.values.push_back(entropy);
        out.skipped.push_back(false);
    }
    finalize_series(out);
    return out;
}

NiqeAggregate niqe_aggregate(const niqe::NiqeModel& model,
                             std::span<const data::LabeledImage> fakes, const EvalConfig& config) {
    config.validate();
    if (fakes.empty()) throw DomainError("niqe_aggregate: empty fake set");
    NiqeAggregate agg;
    std::vector<double> scores(fakes.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> ok_scores;
    for (std::size_t i = 0; i < fakes.size(); ++i) {
        try {
            scores[i] = niqe::niqe_score(model, fakes[i].pixels);
            ok_scores.push_back(scores[i]);
        } catch (const ScoreError&) {
            ++agg.score_errors;
        }
    }
    if (ok_scores.empty()) throw EvalError("niqe_aggregate: every image failed to score");
    agg.mean = mean(ok_scores);
    agg.stddev = stddev(ok_scores);

    agg.per_center.centers_norm = config.centers;
    for (double c : config.centers) {
        const auto idx = window_members(fakes, c, std::max(config.radius, 1e-12));
        std::vector<double> vals;
        for (auto i : idx)
            if (std::isfinite(scores[i])) vals.push_back(scores[i]);
        if (vals.empty()) {
            agg.per_center.values.push_back(std::numeric_limits<double>::quiet_NaN());
            agg.per_center.skipped.push_back(true);
        } else {
            agg.per_center.values.push_back(mean(vals));
            agg.per_center.skipped.push_back(false);
        }
    }
    finalize_series(agg.per_center);
    return agg;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_series_csv(const std::filesystem::path& path, const PerCenterSeries& s,
                      const data::LabelSpace& space) {
    std::string text = "center_raw,value\n";
    for (std::size_t i = 0; i < s.centers_norm.size(); ++i) {
        if (s.skipped[i]) continue;
        text += fmt(space.denormalize(s.centers_norm[i])) + "," + fmt(s.values[i]) + "\n";
    }
    persist::write_text_file(path, text);
}

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    auto series = [&](const PerCenterSeries& s) {
        nlohmann::json e;
        e["mean"] = s.mean;
        e["std"] = s.stddev;
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < s.centers_norm.size(); ++i) {
            if (s.skipped[i]) continue;
            rows.push_back({space.denormalize(s.centers_norm[i]), s.values[i]});
        }
        e["per_center"] = rows;
        return e;
    };
    j["sfid"] = series(sfid);
    j["niqe"] = series(niqe.per_center);
    j["niqe"]["set_mean"] = niqe.mean;
    j["niqe"]["set_std"] = niqe.stddev;
    j["niqe"]["score_errors"] = niqe.score_errors;
    j["label_score"] = series(label_score.per_center);
    j["label_score"]["set_mae_raw"] = label_score.mae_raw;
    j["diversity"] = series(diversity);
    return j.dump(2);
}

void export_line_graphs(const MetricsReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_series_csv(dir / "sfid.csv", report.sfid, report.space);
    write_series_csv(dir / "niqe.csv", report.niqe.per_center, report.space);
    write_series_csv(dir / "label_score.csv", report.label_score.per_center, report.space);
    write_series_csv(dir / "diversity.csv", report.diversity, report.space);

    std::string summary = "sfid,sfid_std,niqe,niqe_std,diversity,diversity_std,label_score,label_score_std\n";
    summary += fmt(report.sfid.mean) + "," + fmt(report.sfid.stddev) + "," +
               fmt(report.niqe.per_center.mean) + "," + fmt(report.niqe.per_center.stddev) + "," +
               fmt(report.diversity.mean) + "," + fmt(report.diversity.stddev) + "," +
               fmt(report.label_score.per_center.mean) + "," +
               fmt(report.label_score.per_center.stddev) + "\n";
    persist::write_text_file(dir / "summary.csv", summary);
    persist::write_text_file(dir / "metrics.json", report.to_json() + "\n");
}

// ---------------------------------------------------------------------------
// EvalModels persistence

void EvalModels::save(const std::filesystem::path& path) const {
    persist::ArtifactWriter w(persist::kEvalModelMagic);
    w.manifest()["attr_name"] = attr_name;
    w.manifest()["bins"] = extractor.head_dim();
    w.manifest()["regressor_floor_raw"] = regressor_floor_raw;
    extractor.save_state(w, "ext.");
    regressor.save_state(w, "reg.");
    classifier.save_state(w, "cls.");
    w.add_f64("label_bin_edges", label_bin_edges, {label_bin_edges.size()});
    w.add_f64("attr_bin_edges", attr_bin_edges, {attr_bin_edges.size()});
    w.write(path);
}

EvalModels EvalModels::load(const std::filesystem::path& path) {
    auto r = persist::ArtifactReader::open(path, persist::kEvalModelMagic);
    // Infer shape from the stored extractor head.
    const auto head_shape = r.shape("ext.e.head.w");
    const std::size_t bins = head_shape[0];
    const auto c1_shape = r.shape("ext.e.c1.w");
    const std::size_t in_ch = c1_shape[1];
    EvalModels m;
    m.extractor = EvalNet(in_ch, 0, bins, 0);
    m.regressor = EvalNet(in_ch, 0, 1, 0);
    m.classifier = EvalNet(in_ch, 0, bins, 0);
    m.extractor.load_state(r, "ext.");
    m.regressor.load_state(r, "reg.");
    m.classifier.load_state(r, "cls.");
    m.label_bin_edges = r.f64("label_bin_edges");
    m.attr_bin_edges = r.f64("attr_bin_edges");
    m.attr_name = r.manifest().at("attr_name").get<std::string>();
    m.regressor_floor_raw = r.manifest().at("regressor_floor_raw").get<double>();
    return m;
}

}  // namespace ccgm::eval
