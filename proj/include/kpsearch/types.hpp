#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpsearch {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

inline double euclidean_distance(const Point2D& a, const Point2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
};

// Per-gene bounds of the continuous part of the genome.
struct GenomeBounds {
    Interval roll{-30.0, 30.0};
    Interval pitch{-30.0, 30.0};
    Interval yaw{-30.0, 30.0};

    const Interval& axis(int i) const {
        switch (i) {
            case 0: return roll;
            case 1: return pitch;
            default: return yaw;
        }
    }
    Interval& axis(int i) {
        switch (i) {
            case 0: return roll;
            case 1: return pitch;
            default: return yaw;
        }
    }
};

// The search genome: head posture angles in degrees plus a categorical
// 3D-model identifier. The model id is never interpolated arithmetically.
struct ImageCharacteristics {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    int model_id = 0;

    double angle(int i) const {
        switch (i) {
            case 0: return roll;
            case 1: return pitch;
            default: return yaw;
        }
    }
    void set_angle(int i, double v) {
        switch (i) {
            case 0: roll = v; break;
            case 1: pitch = v; break;
            default: yaw = v; break;
        }
    }

    bool within(const GenomeBounds& b) const {
        return b.roll.contains(roll) && b.pitch.contains(pitch) && b.yaw.contains(yaw);
    }
};

inline constexpr int kNumContinuousGenes = 3;

// Labeled actual key-point positions of one test image. Invisible key-points
// have no position. Face dimensions come from the visible points and are the
// NE normalizer.
struct GroundTruth {
    std::vector<std::optional<Point2D>> positions;
    double face_width = 0.0;
    double face_height = 0.0;

    std::size_t key_point_count() const { return positions.size(); }

    std::vector<std::size_t> visible_indices() const {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (positions[i].has_value()) v.push_back(i);
        }
        return v;
    }
};

// Predicted positions; a predictor always emits all k points.
struct Prediction {
    std::vector<Point2D> positions;
};

// One evaluated genome: ground truth, prediction, and the per-objective
// fitness vector (NE per visible key-point, 0 for invisible ones).
struct EvaluatedTestCase {
    ImageCharacteristics ic;
    GroundTruth truth;
    Prediction prediction;
    std::vector<double> fitness;
};

// Tracks which objectives are covered (some archived test reaches NE >= eps).
class ObjectiveState {
public:
    ObjectiveState(std::size_t k, double epsilon)
        : epsilon_(epsilon), covered_(k, false) {}

    double epsilon() const { return epsilon_; }
    std::size_t key_point_count() const { return covered_.size(); }

    bool is_covered(std::size_t i) const { return covered_[i]; }
    void cover(std::size_t i) { covered_[i] = true; }

    std::size_t covered_count() const {
        std::size_t n = 0;
        for (bool c : covered_) n += c ? 1 : 0;
        return n;
    }
    std::size_t uncovered_count() const { return covered_.size() - covered_count(); }

    std::vector<std::size_t> covered_set() const { return select(true); }
    std::vector<std::size_t> uncovered_set() const { return select(false); }

private:
    std::vector<std::size_t> select(bool want) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < covered_.size(); ++i) {
            if (covered_[i] == want) out.push_back(i);
        }
        return out;
    }

    double epsilon_;
    std::vector<bool> covered_;
};

// Per-objective store of the best qualifying test case seen so far. The map
// holds an entry for objective i only when some test reached fitness[i] >=
// epsilon; the entry always carries the maximum fitness[i] seen, first seen
// winning ties.
class Archive {
public:
    explicit Archive(double epsilon) : epsilon_(epsilon) {}

    double epsilon() const { return epsilon_; }

    // Returns true when the archive changed.
    bool consider(const EvaluatedTestCase& test) {
        bool changed = false;
        for (std::size_t i = 0; i < test.fitness.size(); ++i) {
            if (test.fitness[i] < epsilon_) continue;
            auto it = entries_.find(i);
            if (it == entries_.end()) {
                entries_.emplace(i, test);
                changed = true;
            } else if (test.fitness[i] > it->second.fitness[i]) {
                it->second = test;
                changed = true;
            }
        }
        return changed;
    }

    bool covers(std::size_t objective) const { return entries_.count(objective) > 0; }
    std::size_t size() const { return entries_.size(); }

    const EvaluatedTestCase* entry(std::size_t objective) const {
        auto it = entries_.find(objective);
        return it == entries_.end() ? nullptr : &it->second;
    }

    const std::map<std::size_t, EvaluatedTestCase>& entries() const { return entries_; }

    // Reinstates a stored entry verbatim; only deserialization should use this.
    void restore(std::size_t objective, EvaluatedTestCase test) {
        entries_[objective] = std::move(test);
    }

private:
    double epsilon_;
    std::map<std::size_t, EvaluatedTestCase> entries_;
};

// Human label for objective i; key-points are numbered from 1 in reports.
inline std::string kp_label(std::size_t index) {
    return "KP" + std::to_string(index + 1);
}

}  // namespace kpsearch
