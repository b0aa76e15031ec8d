#include "ccgm/negatives/negatives.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/stats.hpp"
#include "ccgm/persistence/persistence.hpp"

namespace ccgm::negatives {

void TypeIConfig::validate() const {
    if (!(q1 > 0.0 && q1 < 1.0)) throw ConfigError("q1 must lie in (0,1)");
}

double type1_threshold(std::span<const double> train_labels, double y_anchor, double q1) {
    if (train_labels.empty()) throw DomainError("type1_threshold: empty label list");
    if (q1 < 0.0 || q1 > 1.0) throw DomainError("type1_threshold: q1 outside [0,1]");
    std::vector<double> dist(train_labels.size());
    for (std::size_t i = 0; i < train_labels.size(); ++i)
        dist[i] = std::abs(y_anchor - train_labels[i]);
    const std::size_t n = dist.size();
    if (n == 1) return dist[0];
    const double h = static_cast<double>(n - 1) * q1;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double w = h - static_cast<double>(lo);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(lo), dist.end());
    const double d_lo = dist[lo];
    if (w == 0.0 || lo + 1 >= n) return d_lo;
    const double d_hi =
        *std::min_element(dist.begin() + static_cast<std::ptrdiff_t>(lo) + 1, dist.end());
    return d_lo + w * (d_hi - d_lo);
}

std::vector<std::size_t> type1_select(std::span<const double> train_labels, double y_anchor,
                                      double q1) {
    const double c = type1_threshold(train_labels, y_anchor, q1);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < train_labels.size(); ++i)
        if (std::abs(y_anchor - train_labels[i]) > c) selected.push_back(i);
    return selected;
}

// ---------------------------------------------------------------------------
// NegativePool

NegativePool::NegativePool(std::vector<PoolEntry> entries, Mode mode,
                           std::map<double, double> per_label_thresholds, double global_threshold,
                           std::string manifest_json)
    : entries_(std::move(entries)),
      mode_(mode),
      thresholds_(std::move(per_label_thresholds)),
      global_threshold_(global_threshold),
      manifest_json_(std::move(manifest_json)) {
    std::sort(entries_.begin(), entries_.end(), [](const PoolEntry& a, const PoolEntry& b) {
        if (a.label_norm != b.label_norm) return a.label_norm < b.label_norm;
        return a.id < b.id;
    });
}

double NegativePool::threshold_for(double label_norm) const {
    if (mode_ == Mode::global) return global_threshold_;
    auto it = thresholds_.find(label_norm);
    if (it == thresholds_.end())
        throw DomainError("negative pool has no threshold for the requested label");
    return it->second;
}

void NegativePool::verify() const {
    for (const auto& e : entries_) {
        if (!(e.niqe_score > threshold_for(e.label_norm)))
            throw CorruptionError("negative pool entry violates score > threshold");
    }
}

const PoolEntry& NegativePool::query_vicinity(double y_target, double kappa, Rng& rng,
                                              PoolQueryStats* stats) const {
    if (entries_.empty()) throw ConfigError("negative pool is empty");
    if (!(kappa > 0.0)) throw DomainError("query_vicinity: kappa must be > 0");
    PoolQueryStats local;
    PoolQueryStats& st = stats ? *stats : local;
    st = PoolQueryStats{};

    auto lower = [&](double v) {
        return std::lower_bound(entries_.begin(), entries_.end(), v,
                                [](const PoolEntry& e, double x) { return e.label_norm < x; });
    };
    auto upper = [&](double v) {
        return std::upper_bound(entries_.begin(), entries_.end(), v,
                                [](double x, const PoolEntry& e) { return x < e.label_norm; });
    };

    double k = kappa;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        auto lo = lower(y_target - k);
        auto hi = upper(y_target + k);
        if (lo != hi) {
            st.widenings = attempt;
            const auto n = static_cast<std::uint64_t>(std::distance(lo, hi));
            return *(lo + static_cast<std::ptrdiff_t>(rng.uniform_index(n)));
        }
        k *= 2.0;
    }
    // All widenings exhausted: nearest label wins (ties by lower label).
    st.widenings = 6;
    st.nearest_fallback = true;
    const PoolEntry* best = &entries_.front();
    double best_d = std::abs(best->label_norm - y_target);
    for (const auto& e : entries_) {
        const double d = std::abs(e.label_norm - y_target);
        if (d < best_d) {
            best_d = d;
            best = &e;
        }
    }
    return *best;
}

void NegativePool::save(const std::filesystem::path& path) const {
    persist::ArtifactWriter w(persist::kPoolMagic);
    auto manifest = nlohmann::json::parse(manifest_json_.empty() ? "{}" : manifest_json_);
    manifest["mode"] = mode_ == Mode::per_label ? "per_label" : "global";
    manifest["count"] = entries_.size();
    if (mode_ == Mode::global) {
        manifest["threshold"] = global_threshold_;
    } else {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& [label, c] : thresholds_) t.push_back({label, c});
        manifest["thresholds"] = t;
    }
    w.manifest() = manifest;

    if (!entries_.empty()) {
        const auto& first = entries_.front().image;
        const std::size_t C = first.dim(0), H = first.dim(1), W = first.dim(2);
        std::vector<float> images(entries_.size() * C * H * W);
        std::vector<double> labels(entries_.size()), scores(entries_.size());
        std::vector<std::uint64_t> ids(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            std::copy(e.image.flat().begin(), e.image.flat().end(),
                      images.begin() + static_cast<std::ptrdiff_t>(i * C * H * W));
            labels[i] = e.label_norm;
            scores[i] = e.niqe_score;
            ids[i] = e.id;
        }
        w.add_f32("images", images, {entries_.size(), C, H, W});
        w.add_f64("labels", labels, {entries_.size()});
        w.add_f64("scores", scores, {entries_.size()});
        w.add_u64("ids", ids);
    }
    w.write(path);
}

NegativePool NegativePool::load(const std::filesystem::path& path) {
    auto r = persist::ArtifactReader::open(path, persist::kPoolMagic);
    const auto& m = r.manifest();
    const Mode mode = m.at("mode").get<std::string>() == "per_label" ? Mode::per_label : Mode::global;
    std::map<double, double> thresholds;
    double global_threshold = 0.0;
    if (mode == Mode::global) {
        global_threshold = m.at("threshold").get<double>();
    } else {
        for (const auto& t : m.at("thresholds"))
            thresholds[t[0].get<double>()] = t[1].get<double>();
    }
    std::vector<PoolEntry> entries;
    if (r.has("images")) {
        const auto shape = r.shape("images");
        const auto images = r.f32("images");
        const auto labels = r.f64("labels");
        const auto scores = r.f64("scores");
        const auto ids = r.u64("ids");
        const std::size_t N = shape[0], C = shape[1], H = shape[2], W = shape[3];
        entries.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            entries[i].image = Tensor({C, H, W});
            std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(i * C * H * W), C * H * W,
                        entries[i].image.flat().begin());
            entries[i].label_norm = labels[i];
            entries[i].niqe_score = scores[i];
            entries[i].id = ids[i];
        }
    }
    nlohmann::json stripped = m;
    stripped.erase("tensors");
    NegativePool pool(std::move(entries), mode, std::move(thresholds), global_threshold,
                      stripped.dump());
    pool.verify();
    return pool;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

struct Scored {
    Tensor image;
    double label = 0.0;
    double score = 0.0;
    std::uint64_t id = 0;
};

// Samples and scores one candidate; returns nullopt on the score error path.
std::optional<Scored> sample_candidate(const GeneratorFn& generator, const ScoreFn& scorer,
                                       double label, std::uint64_t seed, std::uint64_t id,
                                       BuildReport& report) {
    Rng rng = Rng::derive(seed, {0x747970653249ULL, id});
    Scored s;
    s.image = generator(label, rng);
    s.label = label;
    s.id = id;
    report.generated++;
    try {
        s.score = scorer(s.image);
    } catch (const ScoreError&) {
        report.degenerate++;
        return std::nullopt;
    }
    report.scored++;
    return s;
}

ScoreFn make_niqe_scorer(const niqe::NiqeModel& model) {
    return [&model](const Tensor& image) { return niqe::niqe_score(model, image); };
}

nlohmann::json base_manifest(double q2, std::uint64_t seed, const std::string& generator_id,
                             const BuildReport& report) {
    nlohmann::json m;
    m["q2"] = q2;
    m["seed"] = seed;
    m["generator"] = generator_id;
    m["generated"] = report.generated;
    m["degenerate"] = report.degenerate;
    return m;
}

}  // namespace

NegativePool build_type2_integer(const GeneratorFn& generator, const data::LabelSpace& label_space,
                                 std::size_t m_per_label, double q2, const ScoreFn& scorer,
                                 std::uint64_t seed, const std::string& generator_id,
                                 BuildReport* report) {
    if (label_space.kind() != data::LabelKind::integer_valued)
        throw ConfigError("build_type2_integer requires an integer-valued label space");
    if (m_per_label < 10) throw ConfigError("build_type2_integer requires m_per_label >= 10");
    if (!(q2 >= 0.0 && q2 <= 1.0)) throw ConfigError("q2 must lie in [0,1]");

    BuildReport local;
    BuildReport& rep = report ? *report : local;
    std::vector<PoolEntry> kept;
    std::map<double, double> thresholds;
    std::uint64_t id = 0;
    for (double label : label_space.distinct_labels()) {
        std::vector<Scored> group;
        group.reserve(m_per_label);
        for (std::size_t j = 0; j < m_per_label; ++j, ++id) {
            if (auto s = sample_candidate(generator, scorer, label, seed, id, rep))
                group.push_back(std::move(*s));
        }
        if (group.empty()) continue;
        std::vector<double> scores;
        scores.reserve(group.size());
        for (const auto& g : group) scores.push_back(g.score);
        const double c = quantile_linear(scores, q2);
        thresholds[label] = c;
        for (auto& g : group) {
            if (g.score > c) {
                kept.push_back(PoolEntry{std::move(g.image), g.label, g.score, g.id});
                rep.kept++;
            }
        }
    }

    auto manifest = base_manifest(q2, seed, generator_id, rep);
    manifest["m_per_label"] = m_per_label;
    return NegativePool(std::move(kept), NegativePool::Mode::per_label, std::move(thresholds), 0.0,
                        manifest.dump());
}

NegativePool build_type2_integer(const GeneratorFn& generator, const data::LabelSpace& label_space,
                                 std::size_t m_per_label, double q2, const niqe::NiqeModel& model,
                                 std::uint64_t seed, const std::string& generator_id,
                                 BuildReport* report) {
    return build_type2_integer(generator, label_space, m_per_label, q2, make_niqe_scorer(model),
                               seed, generator_id, report);
}

NegativePool build_type2_continuous(const GeneratorFn& generator, const LabelSamplerFn& labels,
                                    std::size_t m_total, double q2, const ScoreFn& scorer,
                                    std::uint64_t seed, const std::string& generator_id,
                                    BuildReport* report) {
    if (m_total < 100) throw ConfigError("build_type2_continuous requires M >= 100");
    if (!(q2 >= 0.0 && q2 <= 1.0)) throw ConfigError("q2 must lie in [0,1]");

    BuildReport local;
    BuildReport& rep = report ? *report : local;
    std::vector<Scored> group;
    group.reserve(m_total);
    for (std::uint64_t id = 0; id < m_total; ++id) {
        Rng label_rng = Rng::derive(seed, {0x6c626c32ULL, id});
        const double label = labels(label_rng);
        if (auto s = sample_candidate(generator, scorer, label, seed, id, rep))
            group.push_back(std::move(*s));
    }
    if (group.empty()) throw DomainError("build_type2_continuous: every candidate was degenerate");

    std::vector<double> scores;
    scores.reserve(group.size());
    for (const auto& g : group) scores.push_back(g.score);
    const double c = quantile_linear(scores, q2);
    std::vector<PoolEntry> kept;
    for (auto& g : group) {
        if (g.score > c) {
            kept.push_back(PoolEntry{std::move(g.image), g.label, g.score, g.id});
            rep.kept++;
        }
    }
    auto manifest = base_manifest(q2, seed, generator_id, rep);
    manifest["m_total"] = m_total;
    return NegativePool(std::move(kept), NegativePool::Mode::global, {}, c, manifest.dump());
}

NegativePool build_type2_continuous(const GeneratorFn& generator, const LabelSamplerFn& labels,
                                    std::size_t m_total, double q2, const niqe::NiqeModel& model,
                                    std::uint64_t seed, const std::string& generator_id,
                                    BuildReport* report) {
    return build_type2_continuous(generator, labels, m_total, q2, make_niqe_scorer(model), seed,
                                  generator_id, report);
}

// ---------------------------------------------------------------------------
// Jigsaw

Tensor jigsaw_negative(const Tensor& image, int grid, Rng& rng,
                       std::vector<std::size_t>* perm_out) {
    if (grid != 2 && grid != 4) throw DomainError("jigsaw grid must be 2 or 4");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const auto g = static_cast<std::size_t>(grid);
    if (H % g != 0 || W % g != 0)
        throw DomainError("jigsaw: image side not divisible by grid");
    const std::size_t th = H / g, tw = W / g;
    const std::size_t n = g * g;

    std::vector<std::size_t> perm(n);
    for (;;) {
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
        bool identity = true;
        for (std::size_t i = 0; i < n; ++i)
            if (perm[i] != i) {
                identity = false;
                break;
            }
        if (!identity) break;
    }

    Tensor out({C, H, W});
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t src = perm[t];
        const std::size_t dr = (t / g) * th, dc = (t % g) * tw;
        const std::size_t sr = (src / g) * th, sc = (src % g) * tw;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < th; ++y)
                for (std::size_t x = 0; x < tw; ++x)
                    out(c, dr + y, dc + x) = image(c, sr + y, sc + x);
    }
    if (perm_out) *perm_out = perm;
    return out;
}

}  // namespace ccgm::negatives
