#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ccgm/core/errors.hpp"

namespace ccgm {

// Empirical quantile with linear interpolation between order statistics
// (the "type 7" convention: h = (n-1)q). Used by every quantile-based
// filter in the project so counts stay testable.
inline double quantile_linear(std::span<const double> values, double q) {
    if (values.empty()) throw DomainError("quantile of empty sample");
    if (q < 0.0 || q > 1.0) throw DomainError("quantile level outside [0,1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    const double w = h - static_cast<double>(lo);
    return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

inline double mean(std::span<const double> v) {
    if (v.empty()) throw DomainError("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (1/(n-1)); zero for a single value.
inline double stddev(std::span<const double> v) {
    if (v.empty()) throw DomainError("stddev of empty sample");
    if (v.size() == 1) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double median(std::span<const double> v) { return quantile_linear(v, 0.5); }

}  // namespace ccgm
