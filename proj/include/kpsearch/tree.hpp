#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpsearch/fitness.hpp"
#include "kpsearch/rng.hpp"
#include "kpsearch/types.hpp"

namespace kpsearch {

struct Observation {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    int model_id = 0;
    double value = 0.0;

    double angle(std::size_t axis) const {
        switch (axis) {
            case 0: return roll;
            case 1: return pitch;
            case 2: return yaw;
        }
        throw std::out_of_range("Observation::angle");
    }
};

struct TreeParams {
    std::size_t min_leaf = 10;
    std::size_t max_depth = 32;      // levels of splits below the root
    bool prune = true;
    std::uint64_t seed = 1;          // holdout split / fold shuffle seed
    double min_reduction = 1e-12;    // smallest variance reduction worth a split
};

// Default minimum leaf population for a data set of the given size.
inline std::size_t scaled_min_leaf(std::size_t n) {
    return std::max<std::size_t>(10, (n + 99) / 100);
}

// Split features: the three angles by index, then the categorical model id.
inline constexpr int kFeatureModel = 3;

struct TreeNode {
    double mean = 0.0;
    std::size_t count = 0;
    int feature = -1;         // -1 marks a leaf
    double threshold = 0.0;   // numeric split: left takes x < threshold
    std::vector<int> categories;  // model split: child i takes categories[i]
    std::size_t fallback = 0;     // child index for model ids never seen while growing
    std::vector<std::unique_ptr<TreeNode>> children;

    bool is_leaf() const { return feature < 0; }

    const TreeNode& route(const Observation& x) const {
        if (feature == kFeatureModel) {
            for (std::size_t i = 0; i < categories.size(); ++i) {
                if (categories[i] == x.model_id) return *children[i];
            }
            return *children[fallback];
        }
        return x.angle(static_cast<std::size_t>(feature)) < threshold ? *children[0]
                                                                      : *children[1];
    }
};

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double reduction = 0.0;
};

inline double subset_mean(const std::vector<Observation>& data,
                          const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += data[i].value;
    return s / static_cast<double>(idx.size());
}

inline double subset_sse(const std::vector<Observation>& data,
                         const std::vector<std::size_t>& idx, double mean) {
    double s = 0.0;
    for (std::size_t i : idx) {
        double d = data[i].value - mean;
        s += d * d;
    }
    return s;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<Observation>& data, const TreeParams& params)
        : data_(data), params_(params) {}

    std::unique_ptr<TreeNode> grow(std::vector<std::size_t> idx, std::size_t depth) const {
        auto node = std::make_unique<TreeNode>();
        node->mean = subset_mean(data_, idx);
        node->count = idx.size();
        if (idx.size() < 2 * params_.min_leaf || depth >= params_.max_depth) return node;

        const double node_sse = subset_sse(data_, idx, node->mean);
        SplitChoice best = best_split(idx, node->mean, node_sse);
        if (best.feature < 0 || best.reduction <= params_.min_reduction) return node;

        node->feature = best.feature;
        if (best.feature == kFeatureModel) {
            std::map<int, std::vector<std::size_t>> groups;
            for (std::size_t i : idx) groups[data_[i].model_id].push_back(i);
            std::size_t largest = 0, largest_count = 0;
            for (auto& [id, members] : groups) {
                node->categories.push_back(id);
                if (members.size() > largest_count) {
                    largest_count = members.size();
                    largest = node->categories.size() - 1;
                }
                node->children.push_back(grow(std::move(members), depth + 1));
            }
            node->fallback = largest;
        } else {
            node->threshold = best.threshold;
            std::vector<std::size_t> left, right;
            for (std::size_t i : idx) {
                (data_[i].angle(best.feature) < best.threshold ? left : right).push_back(i);
            }
            node->children.push_back(grow(std::move(left), depth + 1));
            node->children.push_back(grow(std::move(right), depth + 1));
        }
        return node;
    }

private:
    // Best variance-reducing split. Features are scanned in a fixed order and
    // a candidate replaces the incumbent only on a strictly larger reduction,
    // so ties resolve to the earlier feature and lower threshold.
    SplitChoice best_split(const std::vector<std::size_t>& idx, double node_mean,
                           double node_sse) const {
        SplitChoice best;
        for (int f = 0; f < 3; ++f) {
            scan_numeric(idx, f, node_mean, node_sse, best);
        }
        scan_categorical(idx, node_sse, best);
        return best;
    }

    void scan_numeric(const std::vector<std::size_t>& idx, int feature, double node_mean,
                      double node_sse, SplitChoice& best) const {
        const std::size_t n = idx.size();
        std::vector<std::size_t> order = idx;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return data_[a].angle(feature) < data_[b].angle(feature);
        });

        // Prefix sums of the mean-shifted target keep the SSE arithmetic
        // stable even when a node is nearly constant.
        std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double v = data_[order[i]].value - node_mean;
            s1[i + 1] = s1[i] + v;
            s2[i + 1] = s2[i] + v * v;
        }

        for (std::size_t i = params_.min_leaf; i + params_.min_leaf <= n; ++i) {
            double lo = data_[order[i - 1]].angle(feature);
            double hi = data_[order[i]].angle(feature);
            if (!(lo < hi)) continue;
            double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
            double sse_l = s2[i] - s1[i] * s1[i] / nl;
            double sse_r = (s2[n] - s2[i]) - (s1[n] - s1[i]) * (s1[n] - s1[i]) / nr;
            double reduction = node_sse - sse_l - sse_r;
            if (reduction > best.reduction) {
                best.feature = feature;
                best.threshold = (lo + hi) / 2.0;
                best.reduction = reduction;
            }
        }
    }

    // Multiway split on the model id: allowed only when every present id has
    // at least min_leaf observations.
    void scan_categorical(const std::vector<std::size_t>& idx,
                          double node_sse, SplitChoice& best) const {
        std::map<int, std::vector<std::size_t>> groups;
        for (std::size_t i : idx) groups[data_[i].model_id].push_back(i);
        if (groups.size() < 2) return;
        double children_sse = 0.0;
        for (const auto& [id, members] : groups) {
            if (members.size() < params_.min_leaf) return;
            children_sse += subset_sse(data_, members, subset_mean(data_, members));
        }
        double reduction = node_sse - children_sse;
        if (reduction > best.reduction) {
            best.feature = kFeatureModel;
            best.threshold = 0.0;
            best.reduction = reduction;
        }
    }

    const std::vector<Observation>& data_;
    const TreeParams& params_;
};

// Reduced-error pruning: collapse any internal node whose single-leaf holdout
// SSE does not exceed its subtree's. Returns the holdout SSE of the subtree
// after pruning.
inline double prune_node(TreeNode& node, const std::vector<Observation>& data,
                         const std::vector<std::size_t>& holdout) {
    double leaf_sse = 0.0;
    for (std::size_t i : holdout) {
        double d = data[i].value - node.mean;
        leaf_sse += d * d;
    }
    if (node.is_leaf()) return leaf_sse;

    std::vector<std::vector<std::size_t>> routed(node.children.size());
    for (std::size_t i : holdout) {
        const Observation& x = data[i];
        if (node.feature == kFeatureModel) {
            std::size_t child = node.fallback;
            for (std::size_t c = 0; c < node.categories.size(); ++c) {
                if (node.categories[c] == x.model_id) {
                    child = c;
                    break;
                }
            }
            routed[child].push_back(i);
        } else {
            routed[x.angle(node.feature) < node.threshold ? 0 : 1].push_back(i);
        }
    }
    double subtree_sse = 0.0;
    for (std::size_t c = 0; c < node.children.size(); ++c) {
        subtree_sse += prune_node(*node.children[c], data, routed[c]);
    }
    if (leaf_sse <= subtree_sse) {
        node.feature = -1;
        node.children.clear();
        node.categories.clear();
        return leaf_sse;
    }
    return subtree_sse;
}

}  // namespace detail

class RegressionTree {
public:
    static RegressionTree fit(const std::vector<Observation>& data, const TreeParams& params) {
        if (data.empty()) throw std::invalid_argument("RegressionTree::fit: no observations");

        std::vector<std::size_t> idx(data.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

        RegressionTree tree;
        std::size_t holdout_n = params.prune ? data.size() / 3 : 0;
        if (holdout_n > 0) {
            Rng rng(params.seed);
            rng.shuffle(idx);
            std::vector<std::size_t> holdout(idx.begin(), idx.begin() + holdout_n);
            std::vector<std::size_t> grow_set(idx.begin() + holdout_n, idx.end());
            tree.root_ = detail::TreeBuilder(data, params).grow(std::move(grow_set), 0);
            detail::prune_node(*tree.root_, data, holdout);
        } else {
            tree.root_ = detail::TreeBuilder(data, params).grow(std::move(idx), 0);
        }
        return tree;
    }

    double predict(const Observation& x) const {
        const TreeNode* node = root_.get();
        while (!node->is_leaf()) node = &node->route(x);
        return node->mean;
    }

    const TreeNode& root() const { return *root_; }

    std::size_t leaf_count() const { return count_leaves(*root_); }

private:
    static std::size_t count_leaves(const TreeNode& node) {
        if (node.is_leaf()) return 1;
        std::size_t n = 0;
        for (const auto& c : node.children) n += count_leaves(*c);
        return n;
    }

    std::unique_ptr<TreeNode> root_;
};

// ---------------------------------------------------------------------------
// Rule extraction
// ---------------------------------------------------------------------------

struct AngleBound {
    double lo = -std::numeric_limits<double>::infinity();  // inclusive
    double hi = std::numeric_limits<double>::infinity();   // exclusive

    bool bounded() const { return std::isfinite(lo) || std::isfinite(hi); }
};

// One root-to-leaf path as a conjunction over the model id and angle ranges.
struct Rule {
    std::optional<int> model;
    std::array<AngleBound, 3> angles;  // roll, pitch, yaw
    double mean = 0.0;
    std::size_t count = 0;

    std::string text() const {
        static constexpr std::array<const char*, 3> letters{"R", "P", "Y"};
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", v);
            return std::string(buf);
        };
        std::vector<std::string> terms;
        if (model) terms.push_back("M=" + std::to_string(*model));
        // Render pitch before roll before yaw to match the reporting
        // convention for pose rules.
        for (std::size_t axis : {std::size_t{1}, std::size_t{0}, std::size_t{2}}) {
            const AngleBound& b = angles[axis];
            if (!b.bounded()) continue;
            if (std::isfinite(b.lo) && std::isfinite(b.hi)) {
                terms.push_back(num(b.lo) + " ≤ " + letters[axis] + " < " + num(b.hi));
            } else if (std::isfinite(b.lo)) {
                terms.push_back(std::string(letters[axis]) + " ≥ " + num(b.lo));
            } else {
                terms.push_back(std::string(letters[axis]) + " < " + num(b.hi));
            }
        }
        std::string out = terms.empty() ? "any" : terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) out += " ∧ " + terms[i];
        out += " → " + num(mean);
        return out;
    }
};

namespace detail {

inline void collect_rules(const TreeNode& node, Rule path, std::vector<Rule>& out) {
    if (node.is_leaf()) {
        path.mean = node.mean;
        path.count = node.count;
        out.push_back(std::move(path));
        return;
    }
    if (node.feature == kFeatureModel) {
        for (std::size_t c = 0; c < node.children.size(); ++c) {
            Rule child = path;
            child.model = node.categories[c];
            collect_rules(*node.children[c], std::move(child), out);
        }
        return;
    }
    std::size_t axis = static_cast<std::size_t>(node.feature);
    Rule left = path;
    left.angles[axis].hi = std::min(left.angles[axis].hi, node.threshold);
    collect_rules(*node.children[0], std::move(left), out);
    Rule right = std::move(path);
    right.angles[axis].lo = std::max(right.angles[axis].lo, node.threshold);
    collect_rules(*node.children[1], std::move(right), out);
}

}  // namespace detail

// All leaf rules, most severe first.
inline std::vector<Rule> extract_rules(const RegressionTree& tree) {
    std::vector<Rule> rules;
    detail::collect_rules(tree.root(), Rule{}, rules);
    std::stable_sort(rules.begin(), rules.end(),
                     [](const Rule& a, const Rule& b) { return a.mean > b.mean; });
    return rules;
}

// ---------------------------------------------------------------------------
// Cross-validation and observation builders
// ---------------------------------------------------------------------------

// Mean absolute error across k shuffled folds; each fold's tree gets its own
// derived holdout seed.
inline double cv_mae(const std::vector<Observation>& data, const TreeParams& params,
                     std::size_t folds = 10) {
    if (data.size() < 2) throw std::invalid_argument("cv_mae: need at least 2 observations");
    folds = std::min<std::size_t>(folds, data.size());

    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(params.seed);
    rng.shuffle(idx);

    double total_mae = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<Observation> train, test;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i % folds == f ? test : train).push_back(data[idx[i]]);
        }
        TreeParams fold_params = params;
        fold_params.seed = derive_seed(params.seed, f + 1);
        RegressionTree tree = RegressionTree::fit(train, fold_params);
        double abs_err = 0.0;
        for (const Observation& x : test) abs_err += std::abs(tree.predict(x) - x.value);
        total_mae += abs_err / static_cast<double>(test.size());
    }
    return total_mae / static_cast<double>(folds);
}

// Per-key-point error observations; tests where the key-point is not visible
// carry no information about it and are skipped.
inline std::vector<Observation> ne_observations(const std::vector<EvaluatedTestCase>& tests,
                                                std::size_t key_point) {
    std::vector<Observation> obs;
    obs.reserve(tests.size());
    for (const auto& t : tests) {
        if (key_point >= t.truth.positions.size() || !t.truth.positions[key_point]) continue;
        obs.push_back({t.ic.roll, t.ic.pitch, t.ic.yaw, t.ic.model_id, t.fitness[key_point]});
    }
    return obs;
}

inline std::vector<Observation> nme_observations(const std::vector<EvaluatedTestCase>& tests) {
    std::vector<Observation> obs;
    obs.reserve(tests.size());
    for (const auto& t : tests) {
        obs.push_back({t.ic.roll, t.ic.pitch, t.ic.yaw, t.ic.model_id, nme(t.truth, t.prediction)});
    }
    return obs;
}

}  // namespace kpsearch
