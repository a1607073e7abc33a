#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "kpsearch/rng.hpp"
#include "kpsearch/types.hpp"

namespace kpsearch {

struct OperatorParams {
    double crossover_prob = 0.9;
    double eta_c = 20.0;     // SBX distribution index when not adaptive
    double mutation_prob = 0.25;  // per gene; one expected mutation over 4 genes
    double eta_m = 20.0;
    double adaptive_eta_lo = 5.0;
    double adaptive_eta_hi = 50.0;

    void validate() const {
        if (crossover_prob < 0.0 || crossover_prob > 1.0) {
            throw ConfigError("crossover probability outside [0, 1]");
        }
        if (mutation_prob < 0.0 || mutation_prob > 1.0) {
            throw ConfigError("mutation probability outside [0, 1]");
        }
        if (eta_c < 0.0 || eta_m < 0.0) throw ConfigError("distribution index must be >= 0");
        if (adaptive_eta_lo > adaptive_eta_hi) throw ConfigError("adaptive eta range inverted");
    }
};

namespace detail {

inline double clamp_to(const Interval& b, double v) {
    return std::clamp(v, b.lo, b.hi);
}

// SBX spread factor from one uniform draw.
inline double sbx_beta(double u, double eta) {
    if (u <= 0.5) {
        return std::pow(2.0 * u, 1.0 / (eta + 1.0));
    }
    return std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
}

}  // namespace detail

// Simulated Binary Crossover on the continuous genes; children are spread
// around the parents with mean preservation before clamping. The categorical
// model gene is exchanged between the children with probability 1/2
// (a categorical label cannot be interpolated). Consumes exactly four
// uniform draws per call.
inline std::pair<ImageCharacteristics, ImageCharacteristics> sbx_crossover(
    const ImageCharacteristics& p1, const ImageCharacteristics& p2, double eta,
    const GenomeBounds& bounds, Rng& rng) {
    ImageCharacteristics c1 = p1;
    ImageCharacteristics c2 = p2;
    for (int g = 0; g < kNumContinuousGenes; ++g) {
        double u = rng.uniform();
        double beta = detail::sbx_beta(u, eta);
        double y1 = p1.angle(g);
        double y2 = p2.angle(g);
        double v1 = 0.5 * ((1.0 + beta) * y1 + (1.0 - beta) * y2);
        double v2 = 0.5 * ((1.0 - beta) * y1 + (1.0 + beta) * y2);
        c1.set_angle(g, detail::clamp_to(bounds.axis(g), v1));
        c2.set_angle(g, detail::clamp_to(bounds.axis(g), v2));
    }
    if (rng.uniform() < 0.5) {
        std::swap(c1.model_id, c2.model_id);
    }
    return {c1, c2};
}

// Distribution index for the adaptive crossover variants: linear in the
// parents' mean best fitness over the uncovered objectives, so parents that
// are close to covering something produce children close to themselves.
inline double adaptive_eta(const std::vector<double>& parent_fitness_1,
                           const std::vector<double>& parent_fitness_2,
                           const std::vector<std::size_t>& uncovered,
                           const OperatorParams& params) {
    auto best_uncovered = [&](const std::vector<double>& f) {
        double best = 0.0;
        for (std::size_t u : uncovered) best = std::max(best, f[u]);
        return best;
    };
    double mean = 0.5 * (best_uncovered(parent_fitness_1) + best_uncovered(parent_fitness_2));
    mean = std::clamp(mean, 0.0, 1.0);
    return params.adaptive_eta_lo + (params.adaptive_eta_hi - params.adaptive_eta_lo) * mean;
}

// Polynomial mutation of the continuous genes, each with probability p_m;
// the model gene is resampled uniformly from the model set with the same
// probability. Genes with degenerate bounds stay put.
inline ImageCharacteristics polynomial_mutation(const ImageCharacteristics& genome,
                                                double eta_m, double p_m,
                                                const GenomeBounds& bounds,
                                                const std::vector<int>& model_set,
                                                Rng& rng) {
    ImageCharacteristics out = genome;
    for (int g = 0; g < kNumContinuousGenes; ++g) {
        if (rng.uniform() >= p_m) continue;
        const Interval& b = bounds.axis(g);
        if (!(b.hi > b.lo)) continue;
        double y = out.angle(g);
        double delta1 = (y - b.lo) / (b.hi - b.lo);
        double delta2 = (b.hi - y) / (b.hi - b.lo);
        double u = rng.uniform();
        double mut_pow = 1.0 / (eta_m + 1.0);
        double deltaq;
        if (u <= 0.5) {
            double xy = 1.0 - delta1;
            double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta_m + 1.0);
            deltaq = std::pow(val, mut_pow) - 1.0;
        } else {
            double xy = 1.0 - delta2;
            double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta_m + 1.0);
            deltaq = 1.0 - std::pow(val, mut_pow);
        }
        out.set_angle(g, detail::clamp_to(b, y + deltaq * (b.hi - b.lo)));
    }
    if (rng.uniform() < p_m) {
        out.model_id = rng.pick(model_set);
    }
    return out;
}

}  // namespace kpsearch
