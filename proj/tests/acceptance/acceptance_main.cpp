// End-to-end acceptance gate. Each criterion prints exactly one line,
// "criterion N: PASS ..." or "criterion N: FAIL ...", with the measured
// numbers inline; the process exits nonzero when any criterion fails.
//
// Thresholds are fixed here, not computed, so a regression anywhere in the
// pipeline (landscape, search, operators, statistics, tree, adapter) turns
// a line red instead of silently shifting the baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kpsearch/external_sut.hpp"
#include "kpsearch/fitness.hpp"
#include "kpsearch/harness.hpp"
#include "kpsearch/operators.hpp"
#include "kpsearch/rng.hpp"
#include "kpsearch/search.hpp"
#include "kpsearch/serialization.hpp"
#include "kpsearch/sorting.hpp"
#include "kpsearch/stats.hpp"
#include "kpsearch/sut.hpp"
#include "kpsearch/synthetic_default.hpp"
#include "kpsearch/tree.hpp"
#include "kpsearch/types.hpp"

namespace {

using namespace kpsearch;
namespace fs = std::filesystem;

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return std::string(buf);
}

// The harness commands narrate to stdout; the gate wants one line per
// criterion, so route their chatter into a buffer while they run.
class QuietCout {
public:
    QuietCout() : old_(std::cout.rdbuf(buffer_.rdbuf())) {}
    ~QuietCout() { std::cout.rdbuf(old_); }

private:
    std::ostringstream buffer_;
    std::streambuf* old_;
};

constexpr double kEps = 0.05;
constexpr std::uint64_t kBudget = 20000;
constexpr std::size_t kReps = 10;
constexpr std::size_t kK = 27;
constexpr std::size_t kBoxedKp = 25;  // fitness index of the boxed defect (KP26)

// ---------------------------------------------------------------------------
// Criteria 1 and 2 share one batch of comparison runs.
// ---------------------------------------------------------------------------

struct RunOutcome {
    double es = 0.0;
    double wall_s = 0.0;
    SearchStatus status = SearchStatus::error;
    std::uint64_t evals = 0;
    Archive archive{kEps};
};

struct ComparisonData {
    std::vector<RunOutcome> rs, mosa, mosa_plus;
    bool ok = false;
    std::string error;
};

ComparisonData collect_comparison_runs() {
    ComparisonData data;
    const std::uint64_t master = 4242;
    SyntheticSutConfig scfg = default_synthetic_config();
    try {
        for (Algorithm alg : {Algorithm::random_search, Algorithm::mosa, Algorithm::mosa_plus}) {
            for (std::size_t rep = 0; rep < kReps; ++rep) {
                SyntheticSut sut(scfg);
                SearchConfig cfg;
                cfg.algorithm = alg;
                cfg.budget = kBudget;
                cfg.epsilon = kEps;
                cfg.seed = derive_seed(master, rep);
                cfg.model_ids = scfg.model_ids();
                cfg.record_evaluations = false;
                auto t0 = std::chrono::steady_clock::now();
                SearchResult res = run_search(sut, cfg);
                auto t1 = std::chrono::steady_clock::now();

                RunOutcome out;
                out.es = effectiveness_score(res.archive, res.key_point_count);
                out.wall_s = std::chrono::duration<double>(t1 - t0).count();
                out.status = res.status;
                out.evals = res.evaluations_used;
                out.archive = res.archive;
                if (alg == Algorithm::random_search) data.rs.push_back(std::move(out));
                if (alg == Algorithm::mosa) data.mosa.push_back(std::move(out));
                if (alg == Algorithm::mosa_plus) data.mosa_plus.push_back(std::move(out));
            }
        }
        data.ok = true;
    } catch (const std::exception& e) {
        data.error = e.what();
    }
    return data;
}

bool criterion_1(const ComparisonData& data, std::string& detail) {
    if (!data.ok) {
        detail = "comparison runs failed: " + data.error;
        return false;
    }
    auto es_of = [](const std::vector<RunOutcome>& runs) {
        std::vector<double> es;
        for (const auto& r : runs) es.push_back(r.es);
        return es;
    };
    std::vector<double> es_rs = es_of(data.rs);
    std::vector<double> es_mosa = es_of(data.mosa);
    std::vector<double> es_plus = es_of(data.mosa_plus);

    double med_rs = median(es_rs);
    double med_mosa = median(es_mosa);
    double med_plus = median(es_plus);
    RankTestResult u = mann_whitney_u(es_mosa, es_rs);
    double a12 = vargha_delaney_a(es_mosa, es_rs);

    double slowest = 0.0, total_wall = 0.0;
    std::uint64_t total_evals = 0;
    bool runs_clean = true;
    auto scan = [&](const std::vector<RunOutcome>& runs) {
        for (const auto& r : runs) {
            slowest = std::max(slowest, r.wall_s);
            total_wall += r.wall_s;
            total_evals += r.evals;
            if (r.status == SearchStatus::error || r.evals != kBudget) runs_clean = false;
        }
    };
    scan(data.rs);
    scan(data.mosa);
    scan(data.mosa_plus);
    double us_per_eval = total_wall / static_cast<double>(total_evals) * 1e6;

    bool pass = runs_clean && med_mosa >= 0.7111 && med_plus >= 0.7111 &&
                med_plus >= med_mosa - 0.05 && u.p_value < 0.05 && a12 > 0.7 &&
                slowest < 300.0 && us_per_eval < 100.0;
    detail = fmt("median ES rs %.4f / mosa %.4f / mosa+ %.4f (floor 0.7111), "
                 "mosa vs rs p=%.2e (<0.05) A12=%.2f (>0.7), slowest run %.2fs, %.1fus/eval",
                 med_rs, med_mosa, med_plus, u.p_value, a12, slowest, us_per_eval);
    return pass;
}

bool criterion_2(const ComparisonData& data, std::string& detail) {
    if (!data.ok) {
        detail = "comparison runs failed: " + data.error;
        return false;
    }
    std::size_t entries = 0;
    bool severities_ok = true;
    auto scan = [&](const std::vector<RunOutcome>& runs) {
        for (const auto& r : runs) {
            for (const auto& [objective, test] : r.archive.entries()) {
                ++entries;
                if (test.fitness.size() != kK) severities_ok = false;
                double s = test.fitness[objective];
                if (!(s >= kEps && s <= 1.0)) severities_ok = false;
            }
        }
    };
    scan(data.rs);
    scan(data.mosa);
    scan(data.mosa_plus);

    std::size_t boxed_hits = 0;
    std::vector<double> plus_ms;
    for (const auto& r : data.mosa) boxed_hits += r.archive.covers(kBoxedKp) ? 1 : 0;
    for (const auto& r : data.mosa_plus) {
        boxed_hits += r.archive.covers(kBoxedKp) ? 1 : 0;
        plus_ms.push_back(misprediction_severity(r.archive, kK)[kBoxedKp]);
    }
    double med_ms = median(plus_ms);

    bool pass = severities_ok && boxed_hits == 2 * kReps && med_ms >= 0.25;
    detail = fmt("%zu archived entries all inside [0.05, 1], boxed KP26 covered %zu/%zu "
                 "evolutionary runs, mosa+ median KP26 severity %.3f (floor 0.25)",
                 entries, boxed_hits, 2 * kReps, med_ms);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 3: preference ranking and crowding against a reference
// implementation on randomized instances full of ties.
// ---------------------------------------------------------------------------

bool criterion_3(std::string& detail) {
    Rng rng(555);
    const std::size_t trials = 1000;
    std::size_t front_bad = 0, crowd_bad = 0;
    const double inf = std::numeric_limits<double>::infinity();

    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t n = 1 + rng.uniform_index(8);
        std::size_t k = 1 + rng.uniform_index(3);
        std::vector<EvaluatedTestCase> pop(n);
        for (auto& tc : pop) {
            tc.fitness.resize(k);
            for (auto& f : tc.fitness) f = 0.25 * static_cast<double>(rng.uniform_index(5));
        }
        std::uint64_t mask = 1 + rng.uniform_index((std::size_t{1} << k) - 1);
        std::vector<std::size_t> scope;
        for (std::size_t u = 0; u < k; ++u) {
            if (mask & (std::uint64_t{1} << u)) scope.push_back(u);
        }

        auto scope_sum = [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t u : scope) s += pop[i].fitness[u];
            return s;
        };

        // Reference front 0: per-objective champion, ties broken by the
        // larger scope sum, then the earliest index.
        std::vector<bool> taken(n, false);
        std::vector<std::size_t> champs;
        for (std::size_t u : scope) {
            std::size_t best = 0;
            double best_f = pop[0].fitness[u];
            double best_s = scope_sum(0);
            for (std::size_t i = 1; i < n; ++i) {
                double f = pop[i].fitness[u];
                double s = scope_sum(i);
                if (f > best_f || (f == best_f && s > best_s)) {
                    best = i;
                    best_f = f;
                    best_s = s;
                }
            }
            if (!taken[best]) {
                taken[best] = true;
                champs.push_back(best);
            }
        }
        std::sort(champs.begin(), champs.end());

        auto dominated_within = [&](std::size_t cand, const std::vector<std::size_t>& group) {
            for (std::size_t other : group) {
                if (other == cand) continue;
                bool worse_somewhere = false, better_somewhere = false;
                for (std::size_t u : scope) {
                    if (pop[other].fitness[u] < pop[cand].fitness[u]) worse_somewhere = true;
                    if (pop[other].fitness[u] > pop[cand].fitness[u]) better_somewhere = true;
                }
                if (!worse_somewhere && better_somewhere) return true;
            }
            return false;
        };

        std::vector<std::vector<std::size_t>> want;
        want.push_back(champs);
        std::vector<std::size_t> remaining;
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) remaining.push_back(i);
        }
        while (!remaining.empty()) {
            std::vector<std::size_t> front, rest;
            for (std::size_t cand : remaining) {
                (dominated_within(cand, remaining) ? rest : front).push_back(cand);
            }
            want.push_back(front);
            remaining = std::move(rest);
        }

        auto got = preference_sort(pop, scope);
        if (got != want) {
            ++front_bad;
            continue;
        }

        // Reference crowding for every front.
        for (const auto& front : got) {
            std::size_t nf = front.size();
            std::vector<double> want_d(nf, 0.0);
            if (nf <= 2) {
                std::fill(want_d.begin(), want_d.end(), inf);
            } else {
                for (std::size_t u : scope) {
                    std::vector<std::pair<double, std::size_t>> order;
                    for (std::size_t j = 0; j < nf; ++j) {
                        order.push_back({pop[front[j]].fitness[u], j});
                    }
                    std::sort(order.begin(), order.end());
                    double lo = order.front().first, hi = order.back().first;
                    want_d[order.front().second] = inf;
                    want_d[order.back().second] = inf;
                    if (hi <= lo) continue;
                    for (std::size_t r = 1; r + 1 < nf; ++r) {
                        want_d[order[r].second] +=
                            (order[r + 1].first - order[r - 1].first) / (hi - lo);
                    }
                }
            }
            auto got_d = crowding_distance(pop, front, scope);
            for (std::size_t j = 0; j < nf; ++j) {
                bool same = got_d[j] == want_d[j] || std::abs(got_d[j] - want_d[j]) <= 1e-15;
                if (!same) ++crowd_bad;
            }
        }
    }

    bool pass = front_bad == 0 && crowd_bad == 0;
    detail = fmt("%zu randomized instances: %zu front mismatches, %zu crowding mismatches "
                 "against the reference ranking",
                 trials, front_bad, crowd_bad);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 4: variation operator contracts.
// ---------------------------------------------------------------------------

bool criterion_4(std::string& detail) {
    GenomeBounds bounds;
    std::vector<int> models;
    for (int m = 0; m < 10; ++m) models.push_back(m);
    OperatorParams params;

    // SBX: bounds, exact draw count, model exchange, mean preservation.
    Rng gen(777);
    std::size_t sbx_trials = 2000, sbx_bad = 0, swaps = 0;
    for (std::size_t t = 0; t < sbx_trials; ++t) {
        ImageCharacteristics p1 = random_genome(gen, bounds, models);
        ImageCharacteristics p2 = random_genome(gen, bounds, models);
        p1.model_id = 3;
        p2.model_id = 7;
        double eta = gen.uniform(1.0, 60.0);

        std::uint64_t seed = derive_seed(7777, t);
        Rng a(seed), b(seed);
        for (int i = 0; i < 4; ++i) b.next_u64();
        auto [c1, c2] = sbx_crossover(p1, p2, eta, bounds, a);
        bool ok = a.next_u64() == b.next_u64();
        ok = ok && c1.within(bounds) && c2.within(bounds);
        ok = ok && ((c1.model_id == 3 && c2.model_id == 7) ||
                    (c1.model_id == 7 && c2.model_id == 3));
        if (c1.model_id == 7) ++swaps;
        for (int g = 0; g < kNumContinuousGenes; ++g) {
            const Interval& iv = bounds.axis(g);
            double y1 = c1.angle(g), y2 = c2.angle(g);
            bool unclamped = y1 > iv.lo && y1 < iv.hi && y2 > iv.lo && y2 < iv.hi;
            if (unclamped && std::abs((y1 + y2) - (p1.angle(g) + p2.angle(g))) > 1e-9) {
                ok = false;
            }
        }
        if (!ok) ++sbx_bad;
    }
    // Binomial(2000, 1/2): 1000 +- 4 sigma.
    bool swaps_ok = swaps >= 906 && swaps <= 1094;

    // Mutation: bounds and per-gene rates.
    std::size_t mut_trials = 2000, mut_bad = 0, angle_changes = 0, model_changes = 0;
    for (std::size_t t = 0; t < mut_trials; ++t) {
        Rng m(derive_seed(779, t));
        ImageCharacteristics genome = random_genome(m, bounds, models);
        ImageCharacteristics out =
            polynomial_mutation(genome, params.eta_m, params.mutation_prob, bounds, models, m);
        if (!out.within(bounds)) ++mut_bad;
        for (int g = 0; g < kNumContinuousGenes; ++g) {
            if (out.angle(g) != genome.angle(g)) ++angle_changes;
        }
        if (out.model_id != genome.model_id) ++model_changes;
    }
    // Binomial(6000, 0.25): 1500 +- 4 sigma; model resample hits a new id
    // 9 times out of 10, so Binomial(2000, 0.225): 450 +- 4 sigma.
    double angle_rate = static_cast<double>(angle_changes) / 6000.0;
    double model_rate = static_cast<double>(model_changes) / 2000.0;
    bool rates_ok = angle_changes >= 1366 && angle_changes <= 1634 && model_changes >= 375 &&
                    model_changes <= 525;

    // Adaptive distribution index: linear between the endpoints, covered
    // objectives ignored, inputs clamped to [0, 1].
    auto eta_near = [&](std::vector<double> f1, std::vector<double> f2,
                        std::vector<std::size_t> scope, double want) {
        return std::abs(adaptive_eta(f1, f2, scope, params) - want) <= 1e-12;
    };
    bool eta_ok = eta_near({0, 0, 0}, {0, 0, 0}, {0, 1, 2}, 5.0) &&
                  eta_near({1, 0, 0}, {0, 0, 1}, {0, 1, 2}, 50.0) &&
                  eta_near({0.5, 0, 0}, {0, 0.5, 0}, {0, 1, 2}, 27.5) &&
                  eta_near({0.2, 0, 0}, {0.6, 0, 0}, {0}, 23.0) &&
                  eta_near({2.0, 0, 0}, {2.0, 0, 0}, {0}, 50.0) &&
                  eta_near({0.9, 0.1, 0}, {0.8, 0.3, 0}, {1}, 14.0);

    // Tournament: rank first, crowding second, first contestant wins ties.
    std::size_t tour_trials = 1000, tour_bad = 0;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tour_trials; ++t) {
        Rng setup(derive_seed(780, t));
        std::size_t n = 2 + setup.uniform_index(15);
        RankedPopulation ranked;
        ranked.rank.resize(n);
        ranked.crowding.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ranked.rank[i] = setup.uniform_index(4);
            double grid[3] = {0.0, 1.5, inf};
            ranked.crowding[i] = grid[setup.uniform_index(3)];
        }
        std::uint64_t seed = derive_seed(7780, t);
        Rng a(seed), b(seed);
        std::size_t i = b.uniform_index(n);
        std::size_t j = b.uniform_index(n);
        std::size_t want = i;
        if (ranked.rank[j] < ranked.rank[i] ||
            (ranked.rank[j] == ranked.rank[i] && ranked.crowding[j] > ranked.crowding[i])) {
            want = j;
        }
        std::size_t got = tournament_select(a, ranked);
        if (got != want || a.next_u64() != b.next_u64()) ++tour_bad;
    }

    bool pass = sbx_bad == 0 && swaps_ok && mut_bad == 0 && rates_ok && eta_ok && tour_bad == 0;
    detail = fmt("sbx %zu/%zu clean (4 draws, bounds, mean, %zu swaps), mutation rates "
                 "%.3f/%.3f (expect 0.250/0.225), adaptive eta exact, tournament %zu/%zu",
                 sbx_trials - sbx_bad, sbx_trials, swaps, angle_rate, model_rate,
                 tour_trials - tour_bad, tour_trials);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 5: rank statistics against exhaustive enumeration.
// ---------------------------------------------------------------------------

bool criterion_5(std::string& detail) {
    Rng rng(888);
    std::size_t mw_trials = 500, mw_bad = 0, a12_bad = 0;
    for (std::size_t t = 0; t < mw_trials; ++t) {
        std::size_t n = 2 + rng.uniform_index(6);
        std::size_t m = 2 + rng.uniform_index(6);
        std::size_t total = n + m;
        std::vector<double> pooled(total);
        for (std::size_t i = 0; i < total; ++i) pooled[i] = 0.5 * static_cast<double>(i);
        rng.shuffle(pooled);
        std::vector<double> a(pooled.begin(), pooled.begin() + n);
        std::vector<double> b(pooled.begin() + n, pooled.end());

        double u_direct = 0.0;
        for (double x : a) {
            for (double y : b) {
                if (x > y) u_direct += 1.0;
            }
        }

        // Null distribution of U over all n-subsets of the pooled ranks.
        double le = 0.0, ge = 0.0, count = 0.0;
        for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
            double rank_sum = 0.0;
            for (std::size_t i = 0; i < total; ++i) {
                if (mask & (1u << i)) rank_sum += static_cast<double>(i + 1);
            }
            double u = rank_sum - static_cast<double>(n) * (n + 1) / 2.0;
            count += 1.0;
            if (u <= u_direct) le += 1.0;
            if (u >= u_direct) ge += 1.0;
        }
        double p_want = std::min(1.0, 2.0 * std::min(le, ge) / count);

        RankTestResult got = mann_whitney_u(a, b);
        if (!got.exact || std::abs(got.statistic - u_direct) > 1e-9 ||
            std::abs(got.p_value - p_want) > 1e-12) {
            ++mw_bad;
        }
        double a12 = vargha_delaney_a(a, b);
        if (std::abs(a12 - u_direct / static_cast<double>(n * m)) > 1e-12) ++a12_bad;
    }
    if (std::abs(vargha_delaney_a({1.0, 1.0}, {1.0, 1.0}) - 0.5) > 1e-15) ++a12_bad;

    std::size_t w_trials = 500, w_bad = 0;
    for (std::size_t t = 0; t < w_trials; ++t) {
        std::size_t n = 2 + rng.uniform_index(11);
        std::vector<double> diffs(n);
        for (auto& d : diffs) {
            double mag = 0.25 * static_cast<double>(1 + rng.uniform_index(4));
            d = rng.uniform() < 0.5 ? -mag : mag;
        }
        std::vector<double> zeros(n, 0.0);

        // Midranks of |d| by counting, then the exact sign-flip distribution.
        std::vector<double> ranks(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t below = 0, equal = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (std::abs(diffs[j]) < std::abs(diffs[i])) ++below;
                if (std::abs(diffs[j]) == std::abs(diffs[i])) ++equal;
            }
            ranks[i] = static_cast<double>(below) + (static_cast<double>(equal) + 1.0) / 2.0;
        }
        double w_plus = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (diffs[i] > 0.0) w_plus += ranks[i];
        }
        double le = 0.0, ge = 0.0;
        const std::uint64_t assignments = std::uint64_t{1} << n;
        for (std::uint64_t mask = 0; mask < assignments; ++mask) {
            double w = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (std::uint64_t{1} << i)) w += ranks[i];
            }
            if (w <= w_plus) le += 1.0;
            if (w >= w_plus) ge += 1.0;
        }
        double p_want = std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(assignments));

        RankTestResult got = wilcoxon_signed_rank(diffs, zeros);
        if (!got.exact || std::abs(got.statistic - w_plus) > 1e-9 ||
            std::abs(got.p_value - p_want) > 1e-12) {
            ++w_bad;
        }
    }

    bool pass = mw_bad == 0 && a12_bad == 0 && w_bad == 0;
    detail = fmt("mann-whitney %zu/%zu and wilcoxon %zu/%zu match enumeration within 1e-12, "
                 "A12 == U/nm (%zu deviations)",
                 mw_trials - mw_bad, mw_trials, w_trials - w_bad, w_trials, a12_bad);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 6: the regression tree recovers the planted boxed defect from
// pooled search traces.
// ---------------------------------------------------------------------------

bool criterion_6(std::string& detail) {
    const std::uint64_t master = 99;
    const Algorithm algs[6] = {Algorithm::random_search, Algorithm::random_search,
                               Algorithm::mosa,          Algorithm::mosa,
                               Algorithm::mosa_plus,     Algorithm::mosa_plus};
    SyntheticSutConfig scfg = default_synthetic_config();
    std::vector<Observation> pool;
    try {
        for (std::size_t i = 0; i < 6; ++i) {
            SyntheticSut sut(scfg);
            SearchConfig cfg;
            cfg.algorithm = algs[i];
            cfg.budget = kBudget;
            cfg.epsilon = kEps;
            cfg.seed = derive_seed(master, i);
            cfg.model_ids = scfg.model_ids();
            cfg.record_evaluations = true;
            SearchResult res = run_search(sut, cfg);
            if (res.status == SearchStatus::error) {
                detail = "trace run failed: " + res.error;
                return false;
            }
            std::vector<EvaluatedTestCase> tests;
            tests.reserve(res.evaluations.size());
            for (auto& rec : res.evaluations) tests.push_back(std::move(rec.test));
            auto obs = ne_observations(tests, kBoxedKp);
            pool.insert(pool.end(), obs.begin(), obs.end());
        }
    } catch (const std::exception& e) {
        detail = std::string("trace run failed: ") + e.what();
        return false;
    }

    TreeParams params;
    params.min_leaf = 40;
    params.prune = true;
    params.seed = 17;
    RegressionTree tree = RegressionTree::fit(pool, params);
    auto rules = extract_rules(tree);
    if (rules.empty()) {
        detail = "no rules extracted";
        return false;
    }
    const Rule& top = rules.front();
    double mae = cv_mae(pool, params, 5);

    // The landscape plants the hot box at model 9, pitch >= 18.41,
    // roll <= -22.31, displacement magnitude 0.30.
    bool model_ok = top.model.has_value() && *top.model == 9;
    bool pitch_ok = std::isfinite(top.angles[1].lo) && std::abs(top.angles[1].lo - 18.41) <= 2.0;
    bool roll_ok = std::isfinite(top.angles[0].hi) && std::abs(top.angles[0].hi + 22.31) <= 2.0;
    bool mean_ok = top.mean >= 0.25;
    bool mae_ok = mae <= 0.008;

    bool pass = model_ok && pitch_ok && roll_ok && mean_ok && mae_ok;
    detail = fmt("%zu pooled observations, top rule model %s pitch>=%.2f roll<%.2f "
                 "mean %.3f n=%zu (plant: 9, 18.41, -22.31, 0.30), cv mae %.5f (cap 0.008)",
                 pool.size(), top.model ? std::to_string(*top.model).c_str() : "-",
                 top.angles[1].lo, top.angles[0].hi, top.mean, top.count, mae);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 7: error normalization against a directly coded reference.
// ---------------------------------------------------------------------------

bool criterion_7(std::string& detail) {
    Rng rng(999);
    std::size_t trials = 1000, bad = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Point2D actual{rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0)};
        Point2D pred{rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0)};
        double w = rng.uniform(50.0, 300.0);
        double h = rng.uniform(50.0, 300.0);
        double dx = actual.x - pred.x, dy = actual.y - pred.y;
        double want = std::min(1.0, std::sqrt(dx * dx + dy * dy) / std::max(w, h));
        if (std::abs(normalized_error(actual, pred, w, h) - want) > 1e-12) ++bad;
        for (double s : {0.37, 8.0}) {
            Point2D sa{actual.x * s, actual.y * s}, sp{pred.x * s, pred.y * s};
            double scaled = normalized_error(sa, sp, w * s, h * s);
            if (std::abs(scaled - normalized_error(actual, pred, w, h)) > 1e-12) ++bad;
        }
    }

    // A prediction further away than the face is large saturates at 1.
    bool clamp_ok =
        normalized_error({10.0, 10.0}, {10.0 + 180.0 + 140.0, 10.0}, 180.0, 140.0) == 1.0;

    // Invisible points score zero and stay out of the mean.
    GroundTruth truth;
    Prediction pred;
    truth.face_width = 180.0;
    truth.face_height = 140.0;
    double visible_sum = 0.0;
    std::size_t visible_n = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        Point2D p{rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)};
        Point2D q{rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)};
        pred.positions.push_back(q);
        if (i == 2 || i == 5) {
            truth.positions.push_back(std::nullopt);
        } else {
            truth.positions.push_back(p);
            visible_sum += normalized_error(p, q, 180.0, 140.0);
            ++visible_n;
        }
    }
    std::vector<double> fit = fitness_vector(truth, pred);
    bool invisible_ok = fit.size() == 8 && fit[2] == 0.0 && fit[5] == 0.0;
    bool nme_ok =
        std::abs(nme(truth, pred) - visible_sum / static_cast<double>(visible_n)) <= 1e-12;

    std::size_t raised = 0;
    try {
        normalized_error({0, 0}, {1, 1}, 0.0, 100.0);
    } catch (const std::invalid_argument&) {
        ++raised;
    }
    try {
        GroundTruth blind;
        blind.positions = {std::nullopt, std::nullopt};
        blind.face_width = blind.face_height = 100.0;
        Prediction two;
        two.positions = {{0, 0}, {1, 1}};
        nme(blind, two);
    } catch (const std::invalid_argument&) {
        ++raised;
    }
    try {
        Prediction one;
        one.positions = {{0, 0}};
        fitness_vector(truth, one);
    } catch (const std::invalid_argument&) {
        ++raised;
    }

    bool pass = bad == 0 && clamp_ok && invisible_ok && nme_ok && raised == 3;
    detail = fmt("%zu random cases within 1e-12 of the reference (scale invariant), "
                 "clamps at 1, invisible points zeroed and skipped, %zu/3 errors raised",
                 trials - bad, raised);
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 8: archive, budget and selection invariants; bit reproducibility;
// record-then-replay round trip.
// ---------------------------------------------------------------------------

bool invariants_hold(Algorithm alg, const SearchResult& res, std::uint64_t budget,
                     std::string& why) {
    if (res.status == SearchStatus::error) {
        why = "run errored: " + res.error;
        return false;
    }
    if (res.evaluations_used != budget) {
        why = "budget not exhausted exactly";
        return false;
    }
    if (res.evaluations.size() != budget) {
        why = "trace length differs from evaluation count";
        return false;
    }
    for (std::size_t i = 0; i < res.evaluations.size(); ++i) {
        if (res.evaluations[i].ordinal != i + 1) {
            why = "ordinals not contiguous";
            return false;
        }
        if (i > 0 && res.evaluations[i].generation < res.evaluations[i - 1].generation) {
            why = "generation numbers go backwards";
            return false;
        }
    }

    std::vector<double> best(kK, 0.0);
    for (const auto& rec : res.evaluations) {
        for (std::size_t o = 0; o < kK; ++o) best[o] = std::max(best[o], rec.test.fitness[o]);
    }
    std::size_t expect_covered = 0;
    for (std::size_t o = 0; o < kK; ++o) {
        const EvaluatedTestCase* e = res.archive.entry(o);
        if (best[o] >= kEps) {
            ++expect_covered;
            if (!e || e->fitness.size() != kK || e->fitness[o] != best[o]) {
                why = "archive entry is not the trace maximum";
                return false;
            }
        } else if (e) {
            why = "archive holds a sub-threshold objective";
            return false;
        }
    }
    if (res.archive.size() != expect_covered) {
        why = "archive size disagrees with covered objectives";
        return false;
    }

    const auto& gens = res.generations;
    if (gens.empty() || gens.back().evaluations != budget ||
        gens.back().covered != res.archive.size()) {
        why = "generation log does not close the run";
        return false;
    }
    for (std::size_t t = 0; t < gens.size(); ++t) {
        double want_e = static_cast<double>(gens[t].covered) / static_cast<double>(kK);
        if (std::abs(gens[t].effectiveness - want_e) > 1e-15 ||
            (t > 0 && gens[t].covered < gens[t - 1].covered)) {
            why = "coverage bookkeeping broken";
            return false;
        }
    }
    if (alg == Algorithm::random_search) {
        std::uint64_t evals = 0;
        for (const auto& g : gens) {
            std::uint64_t batch = std::min<std::uint64_t>(kK, budget - evals);
            evals += batch;
            if (g.population != batch || g.evaluations != evals) {
                why = "random batch sizes off";
                return false;
            }
        }
    } else {
        if (gens[0].population != kK || gens[0].evaluations != kK) {
            why = "initial population size off";
            return false;
        }
        bool shrink = algorithm_shrinks_population(alg);
        for (std::size_t t = 1; t < gens.size(); ++t) {
            const auto& prev = gens[t - 1];
            const auto& cur = gens[t];
            std::uint64_t off = std::min<std::uint64_t>(prev.population, budget - prev.evaluations);
            if (cur.evaluations != prev.evaluations + off) {
                why = "offspring count off";
                return false;
            }
            std::size_t combined = prev.population + static_cast<std::size_t>(off);
            std::size_t expect = combined;
            if (cur.covered < kK) {
                std::size_t cap = shrink ? shrinking_population_size(kK - cur.covered) : kK;
                expect = std::min(cap, combined);
            }
            if (cur.population != expect) {
                why = "selection kept the wrong population size";
                return false;
            }
        }
    }
    return true;
}

bool criterion_8(std::string& detail) {
    SyntheticSutConfig scfg = default_synthetic_config();
    auto run_once = [&](Algorithm alg, std::uint64_t seed, std::uint64_t budget, bool trace) {
        SyntheticSut sut(scfg);
        SearchConfig cfg;
        cfg.algorithm = alg;
        cfg.budget = budget;
        cfg.epsilon = kEps;
        cfg.seed = seed;
        cfg.model_ids = scfg.model_ids();
        cfg.record_evaluations = trace;
        return run_search(sut, cfg);
    };

    std::size_t runs = 0, clean = 0;
    std::string first_why;
    for (Algorithm alg : {Algorithm::random_search, Algorithm::mosa, Algorithm::mosa_plus,
                          Algorithm::fitest, Algorithm::fitest_plus}) {
        for (std::size_t s = 0; s < 3; ++s) {
            ++runs;
            SearchResult res = run_once(alg, derive_seed(31337, s), 3000, true);
            std::string why;
            if (invariants_hold(alg, res, 3000, why)) {
                ++clean;
            } else if (first_why.empty()) {
                first_why = algorithm_name(alg) + ": " + why;
            }
        }
    }

    SearchResult twin_a = run_once(Algorithm::mosa, 77777, 2000, false);
    SearchResult twin_b = run_once(Algorithm::mosa, 77777, 2000, false);
    SearchResult other = run_once(Algorithm::mosa, 77778, 2000, false);
    bool identical = archive_jsonl_string(twin_a.archive) == archive_jsonl_string(twin_b.archive) &&
                     twin_a.evaluations_used == twin_b.evaluations_used &&
                     twin_a.generations.size() == twin_b.generations.size();
    bool distinct = archive_jsonl_string(twin_a.archive) != archive_jsonl_string(other.archive);

    // Record a small study, replay it verbatim, then catch a corrupted rep.
    fs::path dir = fs::temp_directory_path() / "kpsearch_acceptance_replay";
    std::error_code ec;
    fs::remove_all(dir, ec);
    bool replay_ok = false, corrupt_caught = false;
    try {
        RunSpec spec;
        spec.algorithm = Algorithm::mosa;
        spec.budget = 2000;
        spec.epsilon = kEps;
        spec.seed = 4711;
        spec.reps = 2;
        spec.jobs = 2;
        spec.record_trace = false;
        QuietCout quiet;
        replay_ok = cmd_run(spec, dir.string()) == 0 &&
                    cmd_replay({dir.string(), (dir / "replay.json").string(), 1e-9}) == 0;
        std::ofstream(dir / "run_1" / "archive.jsonl", std::ios::trunc).close();
        corrupt_caught =
            cmd_replay({dir.string(), (dir / "replay2.json").string(), 1e-9}) == 1;
    } catch (const std::exception& e) {
        if (first_why.empty()) first_why = std::string("replay round trip threw: ") + e.what();
    }
    fs::remove_all(dir, ec);

    bool pass = clean == runs && identical && distinct && replay_ok && corrupt_caught;
    detail = fmt("%zu/%zu traced runs hold archive/budget/selection invariants%s%s, same-seed "
                 "archives byte-identical %s, seeds separate %s, replay %s and corruption %s",
                 clean, runs, first_why.empty() ? "" : " (first failure: ",
                 first_why.empty() ? "" : (first_why + ")").c_str(), identical ? "yes" : "NO",
                 distinct ? "yes" : "NO", replay_ok ? "verifies" : "FAILS",
                 corrupt_caught ? "flagged" : "MISSED");
    return pass;
}

// ---------------------------------------------------------------------------
// Criterion 9: the out-of-process adapter is indistinguishable from the
// in-process detector and surfaces protocol faults.
// ---------------------------------------------------------------------------

bool criterion_9(std::string& detail) {
    const std::string stub = KPSEARCH_STUB_PATH;
    SyntheticSutConfig scfg = default_synthetic_config();
    SearchConfig cfg;
    cfg.algorithm = Algorithm::mosa;
    cfg.budget = 2000;
    cfg.epsilon = kEps;
    cfg.seed = 2025;
    cfg.model_ids = scfg.model_ids();
    cfg.record_evaluations = false;

    bool loopback_ok = false;
    std::string loop_why;
    try {
        ExternalSut ext({stub, kK, 10000});
        SyntheticSut syn(scfg);
        SearchResult piped = run_search(ext, cfg);
        SearchResult local = run_search(syn, cfg);
        loopback_ok = piped.status == local.status &&
                      piped.evaluations_used == local.evaluations_used &&
                      piped.archive.size() == local.archive.size() && piped.archive.size() > 0 &&
                      archive_jsonl_string(piped.archive) == archive_jsonl_string(local.archive);
        if (!loopback_ok) loop_why = "archives diverge";
    } catch (const std::exception& e) {
        loop_why = e.what();
    }

    std::size_t faults = 0;
    try {
        ExternalSut bad({stub + " badhello", kK, 5000});
    } catch (const ProtocolError&) {
        ++faults;
    }
    for (const char* mode : {"short", "garbage", "badnum", "die"}) {
        try {
            ExternalSut sut({stub + " " + mode, kK, 5000});
            sut.evaluate({1.0, 2.0, 3.0, 0});
        } catch (const ProtocolError&) {
            ++faults;
        }
    }

    bool midrun_ok = false;
    try {
        ExternalSut flaky({stub + " failafter:60", kK, 5000});
        SearchConfig fc = cfg;
        fc.budget = 300;
        fc.record_evaluations = true;
        SearchResult res = run_search(flaky, fc);
        midrun_ok = res.status == SearchStatus::error && res.evaluations_used == 60 &&
                    res.evaluations.size() == 60 && !res.error.empty();
    } catch (const std::exception&) {
        midrun_ok = false;
    }

    bool pass = loopback_ok && faults == 5 && midrun_ok;
    detail = fmt("piped and in-process archives byte-identical over 2000 evaluations%s%s, "
                 "%zu/5 protocol faults raised, mid-run failure kept 60 clean evaluations %s",
                 loopback_ok ? "" : " FAILED: ", loopback_ok ? "" : loop_why.c_str(), faults,
                 midrun_ok ? "and errored" : "WRONG");
    return pass;
}

}  // namespace

int main() {
    struct Line {
        int id;
        bool pass;
        std::string detail;
    };
    std::vector<Line> lines;

    ComparisonData comparison = collect_comparison_runs();
    {
        std::string d;
        bool p = criterion_1(comparison, d);
        lines.push_back({1, p, d});
    }
    {
        std::string d;
        bool p = criterion_2(comparison, d);
        lines.push_back({2, p, d});
    }
    using Fn = bool (*)(std::string&);
    Fn rest[] = {criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8,
                 criterion_9};
    int id = 3;
    for (Fn fn : rest) {
        std::string d;
        bool p = false;
        try {
            p = fn(d);
        } catch (const std::exception& e) {
            d = std::string("unexpected exception: ") + e.what();
        }
        lines.push_back({id++, p, d});
    }

    int failures = 0;
    for (const Line& line : lines) {
        if (!line.pass) ++failures;
        std::printf("criterion %d: %s  %s\n", line.id, line.pass ? "PASS" : "FAIL",
                    line.detail.c_str());
    }
    std::printf("%d/9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
