#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kpsearch/operators.hpp"
#include "kpsearch/rng.hpp"
#include "kpsearch/sorting.hpp"
#include "kpsearch/sut.hpp"
#include "kpsearch/types.hpp"

namespace kpsearch {

enum class Algorithm { random_search, mosa, mosa_plus, fitest, fitest_plus };

inline bool algorithm_is_adaptive(Algorithm a) {
    return a == Algorithm::mosa_plus || a == Algorithm::fitest_plus;
}

inline bool algorithm_shrinks_population(Algorithm a) {
    return a == Algorithm::fitest || a == Algorithm::fitest_plus;
}

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::random_search: return "rs";
        case Algorithm::mosa: return "mosa";
        case Algorithm::mosa_plus: return "mosa+";
        case Algorithm::fitest: return "fitest";
        case Algorithm::fitest_plus: return "fitest+";
    }
    throw std::logic_error("algorithm_name: bad enum");
}

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "rs" || name == "random" || name == "random-search") {
        return Algorithm::random_search;
    }
    if (name == "mosa") return Algorithm::mosa;
    if (name == "mosa+" || name == "mosa-plus") return Algorithm::mosa_plus;
    if (name == "fitest") return Algorithm::fitest;
    if (name == "fitest+" || name == "fitest-plus") return Algorithm::fitest_plus;
    throw ConfigError("unknown algorithm: " + name);
}

struct SearchConfig {
    Algorithm algorithm = Algorithm::mosa;
    std::uint64_t budget = 20000;  // SUT evaluations, initial population included
    double epsilon = 0.05;
    std::uint64_t seed = 1;
    OperatorParams operators;
    GenomeBounds bounds;
    std::vector<int> model_ids;
    bool record_evaluations = true;

    void validate() const {
        if (epsilon <= 0.0 || epsilon > 1.0) throw ConfigError("epsilon outside (0, 1]");
        if (model_ids.empty()) throw ConfigError("no model ids");
        for (std::size_t a = 0; a < kNumContinuousGenes; ++a) {
            const Interval& iv = bounds.axis(a);
            if (!(iv.lo <= iv.hi)) throw ConfigError("empty angle range");
        }
        operators.validate();
    }
};

struct EvaluationRecord {
    std::uint64_t ordinal = 0;  // 1-based position in evaluation order
    std::uint64_t generation = 0;
    EvaluatedTestCase test;
};

struct GenerationRecord {
    std::uint64_t generation = 0;
    std::uint64_t evaluations = 0;  // cumulative
    std::size_t covered = 0;
    std::size_t population = 0;
    double effectiveness = 0.0;
};

enum class SearchStatus { all_covered, budget_exhausted, error };

inline std::string search_status_name(SearchStatus s) {
    switch (s) {
        case SearchStatus::all_covered: return "all_covered";
        case SearchStatus::budget_exhausted: return "budget_exhausted";
        case SearchStatus::error: return "error";
    }
    throw std::logic_error("search_status_name: bad enum");
}

struct SearchResult {
    SearchStatus status = SearchStatus::budget_exhausted;
    std::string error;  // set only when status == error
    std::size_t key_point_count = 0;
    std::uint64_t evaluations_used = 0;
    Archive archive{0.05};
    std::vector<GenerationRecord> generations;
    std::vector<EvaluationRecord> evaluations;
};

// ---------------------------------------------------------------------------
// Search building blocks
// ---------------------------------------------------------------------------

inline ImageCharacteristics random_genome(Rng& rng, const GenomeBounds& bounds,
                                          const std::vector<int>& model_ids) {
    ImageCharacteristics ic;
    ic.roll = rng.uniform(bounds.roll.lo, bounds.roll.hi);
    ic.pitch = rng.uniform(bounds.pitch.lo, bounds.pitch.hi);
    ic.yaw = rng.uniform(bounds.yaw.lo, bounds.yaw.hi);
    ic.model_id = rng.pick(model_ids);
    return ic;
}

inline std::vector<ImageCharacteristics> initial_population(
    Rng& rng, std::size_t n, const GenomeBounds& bounds, const std::vector<int>& model_ids) {
    std::vector<ImageCharacteristics> pop;
    pop.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pop.push_back(random_genome(rng, bounds, model_ids));
    return pop;
}

inline void update_archive(Archive& archive, ObjectiveState& objectives,
                           const EvaluatedTestCase& test) {
    archive.consider(test);
    for (std::size_t i : covered_objectives(test.fitness, objectives.epsilon())) {
        objectives.cover(i);
    }
}

struct RankedPopulation {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

inline RankedPopulation rank_population(const std::vector<EvaluatedTestCase>& population,
                                        const std::vector<std::size_t>& uncovered) {
    auto fronts = preference_sort(population, uncovered);
    RankedPopulation ranked;
    ranked.rank.assign(population.size(), 0);
    ranked.crowding.assign(population.size(), 0.0);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        auto distances = crowding_distance(population, fronts[f], uncovered);
        for (std::size_t j = 0; j < fronts[f].size(); ++j) {
            ranked.rank[fronts[f][j]] = f;
            ranked.crowding[fronts[f][j]] = distances[j];
        }
    }
    return ranked;
}

// Binary tournament on (rank, crowding); the first contestant wins ties.
inline std::size_t tournament_select(Rng& rng, const RankedPopulation& ranked) {
    std::size_t n = ranked.rank.size();
    std::size_t i = rng.uniform_index(n);
    std::size_t j = rng.uniform_index(n);
    if (ranked.rank[j] < ranked.rank[i]) return j;
    if (ranked.rank[j] == ranked.rank[i] && ranked.crowding[j] > ranked.crowding[i]) return j;
    return i;
}

// Breeds `count` children from the ranked population. With `adaptive` set,
// the crossover distribution index is derived per pair from the parents'
// best fitness on the still-uncovered objectives; otherwise the configured
// index is used as-is.
inline std::vector<ImageCharacteristics> generate_offspring(
    Rng& rng, const std::vector<EvaluatedTestCase>& population, const RankedPopulation& ranked,
    const std::vector<std::size_t>& uncovered, std::size_t count, bool adaptive,
    const OperatorParams& params, const GenomeBounds& bounds,
    const std::vector<int>& model_ids) {
    std::vector<ImageCharacteristics> children;
    children.reserve(count);
    while (children.size() < count) {
        std::size_t ia = tournament_select(rng, ranked);
        std::size_t ib = tournament_select(rng, ranked);
        const EvaluatedTestCase& pa = population[ia];
        const EvaluatedTestCase& pb = population[ib];
        ImageCharacteristics c1 = pa.ic;
        ImageCharacteristics c2 = pb.ic;
        if (rng.uniform() < params.crossover_prob) {
            double eta = adaptive ? adaptive_eta(pa.fitness, pb.fitness, uncovered, params)
                                  : params.eta_c;
            std::tie(c1, c2) = sbx_crossover(pa.ic, pb.ic, eta, bounds, rng);
        }
        c1 = polynomial_mutation(c1, params.eta_m, params.mutation_prob, bounds, model_ids, rng);
        c2 = polynomial_mutation(c2, params.eta_m, params.mutation_prob, bounds, model_ids, rng);
        children.push_back(c1);
        if (children.size() < count) children.push_back(c2);
    }
    return children;
}

// FITEST population sizing: two slots per uncovered objective pair, never
// below four, always even.
inline std::size_t shrinking_population_size(std::size_t uncovered_count) {
    std::size_t even = 2 * ((uncovered_count + 1) / 2);
    return std::max<std::size_t>(4, even);
}

// NSGA-II style environmental selection restricted to uncovered objectives:
// whole fronts while they fit, then the most crowded part of the split front.
inline std::vector<EvaluatedTestCase> next_generation(
    const std::vector<EvaluatedTestCase>& candidates, const std::vector<std::size_t>& uncovered,
    std::size_t target) {
    if (target >= candidates.size()) return candidates;
    auto fronts = preference_sort(candidates, uncovered);

    std::vector<EvaluatedTestCase> next;
    next.reserve(target);
    for (const auto& front : fronts) {
        if (next.size() == target) break;
        if (next.size() + front.size() <= target) {
            for (std::size_t idx : front) next.push_back(candidates[idx]);
            continue;
        }
        auto distances = crowding_distance(candidates, front, uncovered);
        std::vector<std::size_t> order(front.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return distances[a] > distances[b];
        });
        for (std::size_t j : order) {
            if (next.size() == target) break;
            next.push_back(candidates[front[j]]);
        }
        break;
    }
    return next;
}

// ---------------------------------------------------------------------------
// Search drivers
// ---------------------------------------------------------------------------

namespace detail {

class SearchRun {
public:
    SearchRun(Sut& sut, const SearchConfig& config)
        : sut_(sut),
          config_(config),
          k_(sut.key_point_count()),
          objectives_(sut.key_point_count(), config.epsilon),
          rng_(config.seed) {
        config_.validate();
        if (k_ == 0) throw ConfigError("sut reports zero key-points");
        result_.key_point_count = k_;
        result_.archive = Archive(config.epsilon);
    }

    SearchResult run() {
        try {
            if (config_.algorithm == Algorithm::random_search) {
                run_random();
            } else {
                run_evolutionary();
            }
        } catch (const std::exception& e) {
            result_.status = SearchStatus::error;
            result_.error = e.what();
        }
        return std::move(result_);
    }

private:
    std::uint64_t remaining() const { return config_.budget - evaluations_used_; }

    // Evaluates genomes in order until the budget runs out; returns the
    // evaluated prefix.
    std::vector<EvaluatedTestCase> evaluate_batch(const std::vector<ImageCharacteristics>& batch,
                                                  std::uint64_t generation) {
        std::vector<EvaluatedTestCase> out;
        out.reserve(batch.size());
        for (const auto& ic : batch) {
            if (remaining() == 0) break;
            EvaluatedTestCase test = sut_.evaluate(ic);
            ++evaluations_used_;
            result_.evaluations_used = evaluations_used_;
            update_archive(result_.archive, objectives_, test);
            if (config_.record_evaluations) {
                result_.evaluations.push_back({evaluations_used_, generation, test});
            }
            out.push_back(std::move(test));
        }
        return out;
    }

    void record_generation(std::uint64_t generation, std::size_t population) {
        GenerationRecord rec;
        rec.generation = generation;
        rec.evaluations = evaluations_used_;
        rec.covered = objectives_.covered_count();
        rec.population = population;
        rec.effectiveness = static_cast<double>(rec.covered) / static_cast<double>(k_);
        result_.generations.push_back(rec);
    }

    void finish() {
        result_.status = objectives_.uncovered_count() == 0 ? SearchStatus::all_covered
                                                            : SearchStatus::budget_exhausted;
    }

    void run_random() {
        std::uint64_t generation = 0;
        while (remaining() > 0 && objectives_.uncovered_count() > 0) {
            auto batch = initial_population(rng_, std::min<std::uint64_t>(k_, remaining()),
                                            config_.bounds, config_.model_ids);
            evaluate_batch(batch, generation);
            record_generation(generation, batch.size());
            ++generation;
        }
        finish();
    }

    void run_evolutionary() {
        std::uint64_t generation = 0;
        auto genomes = initial_population(rng_, std::min<std::uint64_t>(k_, remaining()),
                                          config_.bounds, config_.model_ids);
        std::vector<EvaluatedTestCase> population = evaluate_batch(genomes, generation);
        record_generation(generation, population.size());

        const bool adaptive = algorithm_is_adaptive(config_.algorithm);
        const bool shrinking = algorithm_shrinks_population(config_.algorithm);
        const std::size_t base_size = population.size();

        while (remaining() > 0 && objectives_.uncovered_count() > 0 && !population.empty()) {
            ++generation;
            auto uncovered = objectives_.uncovered_set();
            RankedPopulation ranked = rank_population(population, uncovered);
            std::size_t offspring_target =
                std::min<std::uint64_t>(population.size(), remaining());
            auto offspring_genomes =
                generate_offspring(rng_, population, ranked, uncovered, offspring_target,
                                   adaptive, config_.operators, config_.bounds,
                                   config_.model_ids);
            auto offspring = evaluate_batch(offspring_genomes, generation);
            for (auto& child : offspring) population.push_back(std::move(child));

            uncovered = objectives_.uncovered_set();
            if (uncovered.empty()) {
                record_generation(generation, population.size());
                break;
            }
            std::size_t target =
                shrinking ? std::min(shrinking_population_size(uncovered.size()),
                                     population.size())
                          : base_size;
            population = next_generation(population, uncovered, target);
            record_generation(generation, population.size());
        }
        finish();
    }

    Sut& sut_;
    SearchConfig config_;
    std::size_t k_;
    ObjectiveState objectives_;
    Rng rng_;
    std::uint64_t evaluations_used_ = 0;
    SearchResult result_;
};

}  // namespace detail

inline SearchResult run_search(Sut& sut, const SearchConfig& config) {
    return detail::SearchRun(sut, config).run();
}

}  // namespace kpsearch
