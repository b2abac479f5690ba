#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "knowsr/errors.hpp"

namespace knowsr::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw InsufficientDataError("mean: empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Unbiased (n-1) standard deviation; needs at least two points.
inline double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) throw InsufficientDataError("sample_sd: need at least 2 points");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Trailing moving average: out[i] = mean of in[max(0, i-w+1) .. i]. Early
/// entries average over the shorter available prefix.
inline std::vector<double> trailing_mean(std::span<const double> xs, std::size_t window) {
    if (window == 0) throw ParameterError("trailing_mean: window must be >= 1");
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= i; ++j) s += xs[j];
        out[i] = s / static_cast<double>(i - lo + 1);
    }
    return out;
}

/// Two-sided 97.5% Student t quantile, so +-t * se spans a 95% interval.
/// Exact table through 30 degrees of freedom, normal quantile beyond.
inline double t_quantile_975(std::size_t df) {
    static constexpr double table[30] = {
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (df == 0) throw ParameterError("t_quantile_975: df must be >= 1");
    if (df <= 30) return table[df - 1];
    return 1.959964;
}

/// Mean with a 95% confidence half-width. A single observation has no spread
/// estimate: the interval collapses to the point and `defined` is false.
struct MeanCi {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool defined = false; // true iff >= 2 observations
};

inline MeanCi mean_ci(std::span<const double> xs) {
    MeanCi out;
    out.mean = mean(xs);
    if (xs.size() < 2) {
        out.ci_low = out.ci_high = out.mean;
        out.defined = false;
        return out;
    }
    const double se = sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
    const double half = t_quantile_975(xs.size() - 1) * se;
    out.ci_low = out.mean - half;
    out.ci_high = out.mean + half;
    out.defined = true;
    return out;
}

} // namespace knowsr::stats
