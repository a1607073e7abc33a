#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpsearch/fitness.hpp"
#include "kpsearch/types.hpp"

namespace kpsearch {

struct SutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Maps image characteristics to labeled ground truth plus a prediction.
// Implementations count their own evaluations; the search budget is defined
// in these units.
class Sut {
public:
    virtual ~Sut() = default;
    virtual std::size_t key_point_count() const = 0;
    virtual EvaluatedTestCase evaluate(const ImageCharacteristics& ic) = 0;
    virtual std::uint64_t evaluations() const = 0;
};

// ---------------------------------------------------------------------------
// Rotation helpers. Convention: intrinsic yaw (vertical axis) -> pitch
// (horizontal axis) -> roll (camera axis), i.e. v' = Ry(yaw)*Rx(pitch)*Rz(roll)*v,
// angles in degrees, camera on +z looking at the origin.
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct Mat3 {
    std::array<double, 9> m{};  // row-major

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
                r.m[3 * i + j] = s;
            }
        }
        return r;
    }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

inline Mat3 rotation_x(double deg) {
    double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return {{1, 0, 0, 0, c, -s, 0, s, c}};
}
inline Mat3 rotation_y(double deg) {
    double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}
inline Mat3 rotation_z(double deg) {
    double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

inline Mat3 head_rotation(double roll, double pitch, double yaw) {
    return rotation_y(yaw) * rotation_x(pitch) * rotation_z(roll);
}

// ---------------------------------------------------------------------------
// Synthetic SUT configuration
// ---------------------------------------------------------------------------

struct CanonicalPoint {
    std::string label;
    Vec3 position;  // unit head coordinates
    Vec3 normal;    // outward surface normal, unit length
};

struct ModelParams {
    double scale = 1.0;     // overall head size
    double aspect = 1.0;    // vertical stretch, applied before rotation
    double offset_x = 0.0;  // pixel offset of the head in the frame
    double offset_y = 0.0;
};

// A planted prediction error for one key-point. The predicate is a model
// match plus an angle box. With core_radius == 0 the error is a constant
// `magnitude` everywhere the predicate holds. Otherwise the error is a
// radial profile around the center: a shallow basin `basin_height*(1-d)`
// that gives the search a long-range signal, plus a core
// `(magnitude-basin_height)*(1-d/core_radius)^2` that is the only place the
// severity threshold can be crossed. Distances are normalized by the angle
// ranges, so core_radius is a fraction of the box diagonal.
struct DefectRegion {
    int key_point = 0;
    int model_id = -1;  // -1 matches every model
    Interval roll{-30.0, 30.0};
    Interval pitch{-30.0, 30.0};
    Interval yaw{-30.0, 30.0};
    double magnitude = 0.0;  // peak NE contribution
    double center_roll = 0.0, center_pitch = 0.0, center_yaw = 0.0;
    double core_radius = 0.0;  // 0 = constant profile
    double basin_height = 0.0;
    double dir_x = 1.0, dir_y = 0.0;  // image-plane displacement direction
};

struct SyntheticSutConfig {
    std::vector<CanonicalPoint> points;
    std::vector<ModelParams> models;  // model ids are indices into this table
    GenomeBounds bounds;
    double projection_scale = 100.0;  // pixels per unit head coordinate
    double center_x = 128.0;
    double center_y = 128.0;
    double visibility_threshold = 0.12;
    double noise_amplitude = 0.012;  // relative to max face dimension, <= 0.02
    std::vector<DefectRegion> defects;

    std::size_t key_point_count() const { return points.size(); }

    std::vector<int> model_ids() const {
        std::vector<int> ids(models.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
        return ids;
    }

    void validate() const {
        if (points.empty()) throw ConfigError("synthetic sut: no key-points");
        if (models.empty()) throw ConfigError("synthetic sut: no models");
        if (!(projection_scale > 0.0)) throw ConfigError("synthetic sut: projection scale");
        if (noise_amplitude < 0.0 || noise_amplitude > 0.02) {
            throw ConfigError("synthetic sut: noise amplitude outside [0, 0.02]");
        }
        for (const auto& d : defects) {
            if (d.key_point < 0 || d.key_point >= static_cast<int>(points.size())) {
                throw ConfigError("synthetic sut: defect key-point out of range");
            }
            if (d.model_id >= static_cast<int>(models.size())) {
                throw ConfigError("synthetic sut: defect model out of range");
            }
            if (d.magnitude < 0.0 || d.basin_height < 0.0) {
                throw ConfigError("synthetic sut: defect magnitudes must be >= 0");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Synthetic simulator + predictor
// ---------------------------------------------------------------------------

class SyntheticSut final : public Sut {
public:
    explicit SyntheticSut(SyntheticSutConfig config) : config_(std::move(config)) {
        config_.validate();
    }

    const SyntheticSutConfig& config() const { return config_; }
    std::size_t key_point_count() const override { return config_.points.size(); }
    std::uint64_t evaluations() const override { return evaluations_; }

    // Rotates the canonical head, applies the model shape, projects
    // orthographically and derives visibility from the rotated normals.
    // Face dimensions are the bounding box of the visible actual points.
    GroundTruth render_truth(const ImageCharacteristics& ic) const {
        if (!ic.within(config_.bounds)) {
            throw std::invalid_argument("render_truth: ic out of bounds");
        }
        if (ic.model_id < 0 || ic.model_id >= static_cast<int>(config_.models.size())) {
            throw std::invalid_argument("render_truth: unknown model id");
        }
        const ModelParams& model = config_.models[ic.model_id];
        const Mat3 rot = head_rotation(ic.roll, ic.pitch, ic.yaw);

        GroundTruth truth;
        truth.positions.resize(config_.points.size());
        double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
        bool first = true;
        for (std::size_t i = 0; i < config_.points.size(); ++i) {
            const CanonicalPoint& cp = config_.points[i];
            Vec3 shaped{cp.position.x * model.scale,
                        cp.position.y * model.scale * model.aspect,
                        cp.position.z * model.scale};
            Vec3 p = rot.apply(shaped);
            Vec3 n = rot.apply(cp.normal);
            if (n.z <= config_.visibility_threshold) continue;  // facing away
            Point2D px{config_.center_x + model.offset_x + config_.projection_scale * p.x,
                       config_.center_y + model.offset_y - config_.projection_scale * p.y};
            truth.positions[i] = px;
            min_x = first ? px.x : std::min(min_x, px.x);
            max_x = first ? px.x : std::max(max_x, px.x);
            min_y = first ? px.y : std::min(min_y, px.y);
            max_y = first ? px.y : std::max(max_y, px.y);
            first = false;
        }
        if (first) {
            throw SutError("render_truth: no visible key-points");
        }
        truth.face_width = max_x - min_x;
        truth.face_height = max_y - min_y;
        return truth;
    }

    // Synthetic predictor: actual position plus smooth deterministic noise,
    // plus the planted error where a defect region matches. Invisible
    // key-points are hallucinated at the center of the visible face.
    Prediction predict(const ImageCharacteristics& ic, const GroundTruth& truth) const {
        const double dim = std::max(truth.face_width, truth.face_height);
        double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
        bool first = true;
        for (const auto& p : truth.positions) {
            if (!p) continue;
            min_x = first ? p->x : std::min(min_x, p->x);
            max_x = first ? p->x : std::max(max_x, p->x);
            min_y = first ? p->y : std::min(min_y, p->y);
            max_y = first ? p->y : std::max(max_y, p->y);
            first = false;
        }
        const Point2D face_center{(min_x + max_x) / 2.0, (min_y + max_y) / 2.0};

        Prediction pred;
        pred.positions.resize(truth.positions.size());
        for (std::size_t i = 0; i < truth.positions.size(); ++i) {
            if (!truth.positions[i]) {
                pred.positions[i] = face_center;
                continue;
            }
            Point2D p = *truth.positions[i];
            Point2D noise = baseline_noise(ic, i, dim);
            p.x += noise.x;
            p.y += noise.y;
            for (const DefectRegion& d : config_.defects) {
                if (d.key_point != static_cast<int>(i)) continue;
                double m = defect_magnitude(d, ic);
                p.x += m * dim * d.dir_x;
                p.y += m * dim * d.dir_y;
            }
            pred.positions[i] = p;
        }
        return pred;
    }

    EvaluatedTestCase evaluate(const ImageCharacteristics& ic) override {
        ++evaluations_;
        EvaluatedTestCase test;
        test.ic = ic;
        test.truth = render_truth(ic);
        test.prediction = predict(ic, test.truth);
        test.fitness = fitness_vector(test.truth, test.prediction);
        return test;
    }

    // NE contribution of one defect at the given characteristics.
    static double defect_magnitude(const DefectRegion& d, const ImageCharacteristics& ic) {
        if (d.model_id >= 0 && ic.model_id != d.model_id) return 0.0;
        if (!d.roll.contains(ic.roll) || !d.pitch.contains(ic.pitch) || !d.yaw.contains(ic.yaw)) {
            return 0.0;
        }
        if (d.core_radius <= 0.0) return d.magnitude;
        double dr = (ic.roll - d.center_roll) / 60.0;
        double dp = (ic.pitch - d.center_pitch) / 60.0;
        double dy = (ic.yaw - d.center_yaw) / 60.0;
        double dist = std::sqrt(dr * dr + dp * dp + dy * dy);
        double basin = d.basin_height * std::max(0.0, 1.0 - dist);
        double core = 0.0;
        if (dist < d.core_radius) {
            double t = 1.0 - dist / d.core_radius;
            core = (d.magnitude - d.basin_height) * t * t;
        }
        return basin + core;
    }

private:
    // Low-frequency trigonometric mix; |noise| <= noise_amplitude * dim.
    Point2D baseline_noise(const ImageCharacteristics& ic, std::size_t kp, double dim) const {
        double a1 = 0.11 * ic.roll - 0.07 * ic.pitch + 0.05 * ic.yaw +
                    1.7 * static_cast<double>(kp + 1) + 0.9 * ic.model_id;
        double a2 = -0.06 * ic.roll + 0.09 * ic.pitch + 0.08 * ic.yaw +
                    2.3 * static_cast<double>(kp + 1) - 0.7 * ic.model_id;
        double amp = config_.noise_amplitude * dim / std::numbers::sqrt2;
        return {amp * std::sin(a1), amp * std::cos(a2)};
    }

    SyntheticSutConfig config_;
    std::uint64_t evaluations_ = 0;
};

}  // namespace kpsearch
