#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kpsearch/types.hpp"

namespace kpsearch {

// Normalized error of a predicted key-point position: Euclidean distance
// divided by the larger face dimension, clamped to [0, 1]. A raw ratio can
// exceed 1 for wild predictions; the clamp keeps the stated range.
inline double normalized_error(const Point2D& actual, const Point2D& predicted,
                               double face_width, double face_height) {
    if (!std::isfinite(actual.x) || !std::isfinite(actual.y) ||
        !std::isfinite(predicted.x) || !std::isfinite(predicted.y)) {
        throw std::invalid_argument("normalized_error: non-finite coordinates");
    }
    if (!(face_width > 0.0) || !(face_height > 0.0)) {
        throw std::invalid_argument("normalized_error: face dimensions must be positive");
    }
    double ne = euclidean_distance(actual, predicted) / std::max(face_width, face_height);
    return std::min(ne, 1.0);
}

// Mean normalized error over the visible key-points only.
inline double nme(const GroundTruth& truth, const Prediction& prediction) {
    if (truth.positions.size() != prediction.positions.size()) {
        throw std::invalid_argument("nme: key-point count mismatch");
    }
    double sum = 0.0;
    std::size_t visible = 0;
    for (std::size_t i = 0; i < truth.positions.size(); ++i) {
        if (!truth.positions[i].has_value()) continue;
        sum += normalized_error(*truth.positions[i], prediction.positions[i],
                                truth.face_width, truth.face_height);
        ++visible;
    }
    if (visible == 0) {
        throw std::invalid_argument("nme: no visible key-points");
    }
    return sum / static_cast<double>(visible);
}

// Per-objective fitness: NE for visible key-points, 0 for invisible ones.
// An invisible key-point cannot count as a covered objective, and 0 steers
// the (maximizing) search away without poisoning the arithmetic.
inline std::vector<double> fitness_vector(const GroundTruth& truth,
                                          const Prediction& prediction) {
    if (truth.positions.size() != prediction.positions.size()) {
        throw std::invalid_argument("fitness_vector: key-point count mismatch");
    }
    std::vector<double> fit(truth.positions.size(), 0.0);
    for (std::size_t i = 0; i < truth.positions.size(); ++i) {
        if (!truth.positions[i].has_value()) continue;
        fit[i] = normalized_error(*truth.positions[i], prediction.positions[i],
                                  truth.face_width, truth.face_height);
    }
    return fit;
}

// Indices whose fitness reaches the severity threshold. The boundary counts
// as covered.
inline std::vector<std::size_t> covered_objectives(const std::vector<double>& fitness,
                                                   double epsilon) {
    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < fitness.size(); ++i) {
        if (fitness[i] >= epsilon) covered.push_back(i);
    }
    return covered;
}

}  // namespace kpsearch
