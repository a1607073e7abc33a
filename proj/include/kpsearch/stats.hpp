#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kpsearch/types.hpp"

namespace kpsearch {

// Fraction of key-points with at least one archived severe misprediction.
inline double effectiveness_score(const Archive& archive, std::size_t key_point_count) {
    if (key_point_count == 0) throw std::invalid_argument("effectiveness_score: k == 0");
    return static_cast<double>(archive.size()) / static_cast<double>(key_point_count);
}

// Per-key-point maximum normalized error among the archived tests. A
// key-point no archived test mispredicts badly reports the largest error any
// archived test showed for it, which stays below the severity threshold.
inline std::vector<double> misprediction_severity(const Archive& archive,
                                                  std::size_t key_point_count) {
    std::vector<double> ms(key_point_count, 0.0);
    for (const auto& [objective, test] : archive.entries()) {
        for (std::size_t i = 0; i < key_point_count && i < test.fitness.size(); ++i) {
            ms[i] = std::max(ms[i], test.fitness[i]);
        }
    }
    return ms;
}

inline double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty sample");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

struct RankTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;
};

namespace detail {

// Midranks (1-based, ties averaged) of the given values.
inline std::vector<double> midranks(const std::vector<double>& values) {
    std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

// Sizes of the tie groups in the pooled values.
inline std::vector<std::size_t> tie_groups(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<std::size_t> groups;
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i;
        while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
        if (j > i) groups.push_back(j - i + 1);
        i = j + 1;
    }
    return groups;
}

// Upper tail of the standard normal, doubled, with continuity correction.
inline double normal_two_sided(double deviation, double sigma) {
    if (sigma <= 0.0) return 1.0;
    double z = (std::abs(deviation) - 0.5) / sigma;
    if (z < 0.0) z = 0.0;
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace detail

// Vargha-Delaney effect size: probability that a draw from `a` exceeds a draw
// from `b`, ties counted half.
inline double vargha_delaney_a(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("vargha_delaney_a: empty sample");
    double wins = 0.0;
    for (double x : a) {
        for (double y : b) {
            if (x > y) {
                wins += 1.0;
            } else if (x == y) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// Two-sided Mann-Whitney U test for independent samples. The statistic is
// U of the first sample. Exact enumeration over rank assignments when the
// pooled size is at most 16 and there are no ties; otherwise the normal
// approximation with tie-corrected variance and continuity correction.
inline RankTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    const std::size_t n = a.size(), m = b.size(), total = n + m;

    std::vector<double> pooled;
    pooled.reserve(total);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> ranks = detail::midranks(pooled);
    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) rank_sum_a += ranks[i];
    const double u_stat = rank_sum_a - static_cast<double>(n) * (n + 1) / 2.0;

    auto ties = detail::tie_groups(pooled);
    RankTestResult result;
    result.statistic = u_stat;

    if (total <= 16 && ties.empty()) {
        // Count rank assignments by statistic value with the standard
        // recurrence f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u).
        std::vector<std::vector<double>> f(n + 1, std::vector<double>(n * m + 1, 0.0));
        for (std::size_t j = 0; j <= m; ++j) {
            std::vector<std::vector<double>> g = f;
            for (std::size_t i = 0; i <= n; ++i) {
                for (std::size_t u = 0; u <= n * m; ++u) {
                    if (i == 0 && j == 0) {
                        g[i][u] = (u == 0) ? 1.0 : 0.0;
                    } else {
                        double v = 0.0;
                        if (i > 0 && u >= j) v += g[i - 1][u - j];
                        if (j > 0) v += f[i][u];
                        g[i][u] = v;
                    }
                }
            }
            f = std::move(g);
        }
        const auto& counts = f[n];
        double total_count = 0.0, le = 0.0, ge = 0.0;
        std::size_t u_obs = static_cast<std::size_t>(std::llround(u_stat));
        for (std::size_t u = 0; u < counts.size(); ++u) {
            total_count += counts[u];
            if (u <= u_obs) le += counts[u];
            if (u >= u_obs) ge += counts[u];
        }
        result.exact = true;
        result.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total_count);
        return result;
    }

    const double nm = static_cast<double>(n) * static_cast<double>(m);
    double tie_term = 0.0;
    for (std::size_t t : ties) {
        tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    const double nt = static_cast<double>(total);
    double variance = nm / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    result.exact = false;
    result.p_value = detail::normal_two_sided(u_stat - nm / 2.0, std::sqrt(std::max(0.0, variance)));
    return result;
}

// Two-sided Wilcoxon signed-rank test for paired samples. Zero differences
// are dropped; the statistic is the positive-rank sum W+. Exact enumeration
// over sign assignments (midranks, so ties between magnitudes are fine) when
// at most 12 differences remain, otherwise the normal approximation with
// tie correction.
inline RankTestResult wilcoxon_signed_rank(const std::vector<double>& a,
                                           const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: length mismatch");
    if (a.empty()) throw std::invalid_argument("wilcoxon_signed_rank: empty sample");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        throw std::invalid_argument("wilcoxon_signed_rank: all differences are zero");
    }

    std::vector<double> magnitudes(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) magnitudes[i] = std::abs(diffs[i]);
    std::vector<double> ranks = detail::midranks(magnitudes);

    double w_plus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (diffs[i] > 0.0) w_plus += ranks[i];
    }

    const std::size_t n = diffs.size();
    RankTestResult result;
    result.statistic = w_plus;

    if (n <= 12) {
        const std::uint64_t assignments = std::uint64_t{1} << n;
        double le = 0.0, ge = 0.0;
        for (std::uint64_t mask = 0; mask < assignments; ++mask) {
            double w = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (std::uint64_t{1} << i)) w += ranks[i];
            }
            if (w <= w_plus) le += 1.0;
            if (w >= w_plus) ge += 1.0;
        }
        result.exact = true;
        result.p_value =
            std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(assignments));
        return result;
    }

    auto ties = detail::tie_groups(magnitudes);
    double tie_term = 0.0;
    for (std::size_t t : ties) {
        tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    const double dn = static_cast<double>(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    const double variance = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
    result.exact = false;
    result.p_value = detail::normal_two_sided(w_plus - mean, std::sqrt(std::max(0.0, variance)));
    return result;
}

}  // namespace kpsearch
