// Independent brute-force reference implementations used to cross-check the
// library's correlation statistics. Deliberately written via different
// routes: O(n^2) pair counting for Kendall, O(n^2) counting ranks plus a
// one-pass sum-product Pearson for Spearman.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oracles {

inline double kendall_bruteforce(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    std::int64_t concordant = 0, discordant = 0, x_ties = 0, y_ties = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = xs[i] - xs[j];
            double dy = ys[i] - ys[j];
            if (dx == 0.0) ++x_ties;
            if (dy == 0.0) ++y_ties;
            if (dx * dy > 0.0) ++concordant;
            else if (dx * dy < 0.0) ++discordant;
        }
    }
    const std::int64_t n0 = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
    double denominator = std::sqrt(static_cast<double>(n0 - x_ties)) *
                         std::sqrt(static_cast<double>(n0 - y_ties));
    return static_cast<double>(concordant - discordant) / denominator;
}

inline std::vector<double> midranks_counting(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (values[j] < values[i]) ++less;
            else if (values[j] == values[i]) ++equal;
        }
        ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return ranks;
}

inline double pearson_onepass(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += static_cast<long double>(xs[i]) * xs[i];
        syy += static_cast<long double>(ys[i]) * ys[i];
        sxy += static_cast<long double>(xs[i]) * ys[i];
    }
    long double nn = static_cast<long double>(n);
    long double cov = sxy - sx * sy / nn;
    long double vx = sxx - sx * sx / nn;
    long double vy = syy - sy * sy / nn;
    return static_cast<double>(cov / (std::sqrt(vx) * std::sqrt(vy)));
}

inline double spearman_oracle(std::span<const double> xs, std::span<const double> ys) {
    std::vector<double> rx = midranks_counting(xs);
    std::vector<double> ry = midranks_counting(ys);
    return pearson_onepass(rx, ry);
}

}  // namespace oracles
