#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "kpsearch/types.hpp"

namespace kpsearch {

// Pareto dominance (maximization) restricted to the given objective indices:
// a must be no worse everywhere in scope and strictly better somewhere.
inline bool dominates(const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<std::size_t>& scope) {
    bool strictly_better = false;
    for (std::size_t j : scope) {
        if (a[j] < b[j]) return false;
        if (a[j] > b[j]) strictly_better = true;
    }
    return strictly_better;
}

// Ranked fronts as indices into `population`. Front 0 holds, for each
// uncovered objective, the test with the highest fitness on it (ties broken
// by larger fitness sum over the uncovered objectives, then by insertion
// order). The rest are ranked by non-dominated sorting over the uncovered
// objectives only.
inline std::vector<std::vector<std::size_t>> preference_sort(
    const std::vector<EvaluatedTestCase>& population,
    const std::vector<std::size_t>& uncovered) {
    const std::size_t n = population.size();

    auto uncovered_sum = [&](std::size_t idx) {
        double s = 0.0;
        for (std::size_t u : uncovered) s += population[idx].fitness[u];
        return s;
    };

    std::vector<bool> in_front0(n, false);
    std::vector<std::size_t> front0;
    for (std::size_t u : uncovered) {
        std::size_t best = 0;
        for (std::size_t idx = 1; idx < n; ++idx) {
            double fb = population[best].fitness[u];
            double fi = population[idx].fitness[u];
            if (fi > fb || (fi == fb && uncovered_sum(idx) > uncovered_sum(best))) {
                best = idx;
            }
        }
        if (!in_front0[best]) {
            in_front0[best] = true;
            front0.push_back(best);
        }
    }
    std::sort(front0.begin(), front0.end());

    std::vector<std::vector<std::size_t>> fronts;
    fronts.push_back(std::move(front0));

    std::vector<std::size_t> remaining;
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (!in_front0[idx]) remaining.push_back(idx);
    }

    // Non-dominated sorting of the remainder; n is at most a few dozen, the
    // quadratic peel is plenty.
    while (!remaining.empty()) {
        std::vector<std::size_t> front;
        std::vector<std::size_t> rest;
        for (std::size_t cand : remaining) {
            bool dominated = false;
            for (std::size_t other : remaining) {
                if (other != cand &&
                    dominates(population[other].fitness, population[cand].fitness, uncovered)) {
                    dominated = true;
                    break;
                }
            }
            (dominated ? rest : front).push_back(cand);
        }
        fronts.push_back(std::move(front));
        remaining = std::move(rest);
    }
    if (fronts.back().empty() && fronts.size() > 1) fronts.pop_back();
    return fronts;
}

// NSGA-II crowding distance over the scope objectives for one front, indexed
// like `front`. Boundary solutions on any objective get infinity.
inline std::vector<double> crowding_distance(
    const std::vector<EvaluatedTestCase>& population,
    const std::vector<std::size_t>& front,
    const std::vector<std::size_t>& scope) {
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = front.size();
    std::vector<double> distance(n, 0.0);
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), inf);
        return distance;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t u : scope) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return population[front[a]].fitness[u] < population[front[b]].fitness[u];
        });
        double lo = population[front[order.front()]].fitness[u];
        double hi = population[front[order.back()]].fitness[u];
        distance[order.front()] = inf;
        distance[order.back()] = inf;
        if (hi <= lo) continue;
        for (std::size_t r = 1; r + 1 < n; ++r) {
            double below = population[front[order[r - 1]]].fitness[u];
            double above = population[front[order[r + 1]]].fitness[u];
            distance[order[r]] += (above - below) / (hi - lo);
        }
    }
    return distance;
}

}  // namespace kpsearch
