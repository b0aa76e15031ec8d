#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgm/core/rng.hpp"
#include "ccgm/core/tensor.hpp"
#include "ccgm/data/dataset.hpp"
#include "ccgm/niqe/niqe.hpp"

namespace ccgm::negatives {

struct TypeIConfig {
    double q1 = 0.9;
    void validate() const;
};

// The q1-quantile c of the anchor-to-label distances (type-7 interpolation,
// selection-based: O(n) instead of a sort).
double type1_threshold(std::span<const double> train_labels, double y_anchor, double q1);

// Indices of training labels whose absolute distance to the anchor exceeds
// the q1-quantile of all distances (strict). Empty when every distance ties
// the quantile; the caller resamples the anchor.
std::vector<std::size_t> type1_select(std::span<const double> train_labels, double y_anchor,
                                      double q1);

struct PoolEntry {
    Tensor image;
    double label_norm = 0.0;
    double niqe_score = 0.0;
    std::uint64_t id = 0;  // generation order; part of the canonical sort key
};

struct PoolQueryStats {
    int widenings = 0;        // times kappa was doubled before a hit
    bool nearest_fallback = false;
};

// Persisted Type II set: entries sorted by (label, id), each strictly above
// its governing NIQE threshold.
class NegativePool {
public:
    enum class Mode { per_label, global };

    NegativePool(std::vector<PoolEntry> entries, Mode mode,
                 std::map<double, double> per_label_thresholds, double global_threshold,
                 std::string manifest_json);

    std::size_t size() const { return entries_.size(); }
    const std::vector<PoolEntry>& entries() const { return entries_; }
    Mode mode() const { return mode_; }
    const std::string& manifest() const { return manifest_json_; }
    double threshold_for(double label_norm) const;
    const std::map<double, double>& per_label_thresholds() const { return thresholds_; }
    double global_threshold() const { return global_threshold_; }

    // Uniform draw among entries with |label - y| <= kappa. An empty vicinity
    // doubles kappa up to six times, then falls back to the nearest label;
    // both are reported through `stats`.
    const PoolEntry& query_vicinity(double y_target, double kappa, Rng& rng,
                                    PoolQueryStats* stats = nullptr) const;

    // Re-checks the strict score > threshold invariant; throws CorruptionError.
    void verify() const;

    void save(const std::filesystem::path& path) const;
    static NegativePool load(const std::filesystem::path& path);

private:
    std::vector<PoolEntry> entries_;  // sorted by (label_norm, id)
    Mode mode_;
    std::map<double, double> thresholds_;  // per-label mode: group label -> c_q2
    double global_threshold_ = 0.0;
    std::string manifest_json_;
};

// Abstract handles so builders stay testable without a trained network.
using GeneratorFn = std::function<Tensor(double label_norm, Rng& rng)>;
using ScoreFn = std::function<double(const Tensor&)>;  // may throw ScoreError
using LabelSamplerFn = std::function<double(Rng&)>;

struct BuildReport {
    std::size_t generated = 0;
    std::size_t scored = 0;
    std::size_t degenerate = 0;  // excluded through the score error path
    std::size_t kept = 0;
};

// Per-distinct-label filtering for integer-valued label spaces: a separate
// c_q2 per label, keep scores strictly above it.
NegativePool build_type2_integer(const GeneratorFn& generator, const data::LabelSpace& label_space,
                                 std::size_t m_per_label, double q2, const ScoreFn& scorer,
                                 std::uint64_t seed, const std::string& generator_id,
                                 BuildReport* report = nullptr);
NegativePool build_type2_integer(const GeneratorFn& generator, const data::LabelSpace& label_space,
                                 std::size_t m_per_label, double q2, const niqe::NiqeModel& model,
                                 std::uint64_t seed, const std::string& generator_id,
                                 BuildReport* report = nullptr);

// Single global threshold over all M samples for strictly continuous labels.
NegativePool build_type2_continuous(const GeneratorFn& generator, const LabelSamplerFn& labels,
                                    std::size_t m_total, double q2, const ScoreFn& scorer,
                                    std::uint64_t seed, const std::string& generator_id,
                                    BuildReport* report = nullptr);
NegativePool build_type2_continuous(const GeneratorFn& generator, const LabelSamplerFn& labels,
                                    std::size_t m_total, double q2, const niqe::NiqeModel& model,
                                    std::uint64_t seed, const std::string& generator_id,
                                    BuildReport* report = nullptr);

// Vanilla-NDA baseline: tiles permuted by a uniformly random non-identity
// permutation. The applied permutation is written to `perm_out` when given
// (out[tile i] = in[tile perm[i]]).
Tensor jigsaw_negative(const Tensor& image, int grid, Rng& rng,
                       std::vector<std::size_t>* perm_out = nullptr);

}  // namespace ccgm::negatives
