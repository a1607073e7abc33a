#pragma once

#include <cmath>

#include "kpsearch/sut.hpp"

namespace kpsearch {

namespace detail {

inline CanonicalPoint canonical(std::string label, double px, double py, double pz,
                                double nx, double ny, double nz) {
    double len = std::sqrt(nx * nx + ny * ny + nz * nz);
    return {std::move(label), {px, py, pz}, {nx / len, ny / len, nz / len}};
}

inline DefectRegion bump(int kp, int model, double cr, double cp, double cy,
                         double magnitude, double dx, double dy) {
    DefectRegion d;
    d.key_point = kp;
    d.model_id = model;
    d.magnitude = magnitude;
    d.center_roll = cr;
    d.center_pitch = cp;
    d.center_yaw = cy;
    d.core_radius = 0.06;
    d.basin_height = 0.040;
    d.dir_x = dx;
    d.dir_y = dy;
    return d;
}

}  // namespace detail

// Stylized 27-point head. 24 key-points carry a planted defect: 23 radial
// profiles centered at scattered pose/model combinations, plus one hard box
// on the upper-lip point (model 9, pitch >= 18.41, roll <= -22.31, any yaw)
// with a constant 0.30 displacement. The nose bridge, nose tip and right
// inner eye corner are clean, so their error never exceeds the noise floor.
inline SyntheticSutConfig default_synthetic_config() {
    using detail::bump;
    using detail::canonical;

    SyntheticSutConfig cfg;
    cfg.points = {
        canonical("brow_outer_r", -0.55, 0.45, 0.62, -0.35, 0.20, 0.91),
        canonical("brow_mid_r", -0.35, 0.50, 0.72, -0.15, 0.25, 0.96),
        canonical("brow_inner_r", -0.15, 0.48, 0.78, -0.05, 0.22, 0.97),
        canonical("brow_inner_l", 0.15, 0.48, 0.78, 0.05, 0.22, 0.97),
        canonical("brow_mid_l", 0.35, 0.50, 0.72, 0.15, 0.25, 0.96),
        canonical("brow_outer_l", 0.55, 0.45, 0.62, 0.35, 0.20, 0.91),
        canonical("temple_r", -0.85, 0.05, 0.15, -0.95, 0.00, 0.31),
        canonical("chin", 0.00, -0.95, 0.55, 0.00, -0.50, 0.87),
        canonical("temple_l", 0.85, 0.05, 0.15, 0.95, 0.00, 0.31),
        canonical("eye_outer_r", -0.42, 0.25, 0.70, -0.22, 0.05, 0.97),
        canonical("eye_inner_r", -0.16, 0.24, 0.78, -0.04, 0.03, 1.00),
        canonical("pupil_r", -0.29, 0.25, 0.75, -0.10, 0.04, 0.99),
        canonical("eye_inner_l", 0.16, 0.24, 0.78, 0.04, 0.03, 1.00),
        canonical("pupil_l", 0.29, 0.25, 0.75, 0.10, 0.04, 0.99),
        canonical("eye_outer_l", 0.42, 0.25, 0.70, 0.22, 0.05, 0.97),
        canonical("nose_bridge", 0.00, 0.18, 0.92, 0.00, 0.10, 1.00),
        canonical("nose_tip", 0.00, -0.05, 1.00, 0.00, 0.00, 1.00),
        canonical("nostril_r", -0.14, -0.16, 0.82, -0.25, -0.20, 0.95),
        canonical("nostril_l", 0.14, -0.16, 0.82, 0.25, -0.20, 0.95),
        canonical("cheek_r", -0.62, -0.30, 0.45, -0.60, -0.10, 0.79),
        canonical("cheek_l", 0.62, -0.30, 0.45, 0.60, -0.10, 0.79),
        canonical("jaw_r", -0.42, -0.68, 0.42, -0.45, -0.35, 0.82),
        canonical("jaw_l", 0.42, -0.68, 0.42, 0.45, -0.35, 0.82),
        canonical("mouth_corner_r", -0.28, -0.50, 0.70, -0.20, -0.10, 0.97),
        canonical("mouth_corner_l", 0.28, -0.50, 0.70, 0.20, -0.10, 0.97),
        canonical("lip_top", 0.00, -0.42, 0.85, 0.00, -0.12, 0.99),
        canonical("lip_bottom", 0.00, -0.60, 0.80, 0.00, -0.35, 0.93),
    };
    cfg.models = {
        {1.00, 1.00, 0.0, 0.0},   {0.92, 1.05, 6.0, -4.0},  {1.10, 0.95, -8.0, 5.0},
        {0.85, 1.12, 12.0, 10.0}, {1.05, 0.92, -15.0, -8.0}, {0.88, 1.08, 4.0, 12.0},
        {1.15, 0.98, -5.0, -12.0}, {0.95, 1.02, 9.0, -6.0},  {1.20, 0.94, -12.0, 8.0},
        {1.02, 1.06, 3.0, -3.0},
    };
    cfg.noise_amplitude = 0.006;

    cfg.defects = {
        bump(0, 0, -15.0, 8.0, -5.0, 0.14, 1.0, 0.0),
        bump(1, 1, 10.0, -18.0, 12.0, 0.12, 0.0, 1.0),
        bump(2, 2, 22.0, 15.0, -20.0, 0.16, 0.8, 0.6),
        bump(3, 3, -8.0, -22.0, 18.0, 0.11, -0.6, 0.8),
        bump(4, 4, 5.0, 12.0, 22.0, 0.13, 0.0, -1.0),
        bump(5, 5, -20.0, -5.0, -14.0, 0.15, -1.0, 0.0),
        bump(6, 6, 12.0, -10.0, 12.0, 0.18, 1.0, 0.0),
        bump(7, 7, -5.0, 20.0, 3.0, 0.22, 0.0, 1.0),
        bump(8, 8, 18.0, 6.0, -12.0, 0.18, -1.0, 0.0),
        bump(9, 9, -22.0, -12.0, -8.0, 0.12, 0.6, -0.8),
        bump(11, 0, 8.0, 22.0, 10.0, 0.10, 1.0, 0.0),
        bump(12, 1, -14.0, 2.0, 20.0, 0.11, 0.0, 1.0),
        bump(13, 2, 20.0, -20.0, -22.0, 0.10, -0.8, -0.6),
        bump(14, 3, 2.0, 16.0, -16.0, 0.13, 0.0, -1.0),
        bump(17, 4, -18.0, -8.0, 8.0, 0.20, 0.8, 0.6),
        bump(18, 5, 15.0, 10.0, -18.0, 0.21, -0.8, 0.6),
        bump(19, 6, -10.0, -15.0, -15.0, 0.16, 1.0, 0.0),
        bump(20, 7, 24.0, 18.0, 14.0, 0.17, -1.0, 0.0),
        bump(21, 8, -22.0, 10.0, -5.0, 0.24, 0.0, 1.0),
        bump(22, 9, 6.0, -24.0, -10.0, 0.25, 0.0, 1.0),
        bump(23, 0, 16.0, -6.0, 16.0, 0.30, 0.6, 0.8),
        bump(24, 1, -24.0, 14.0, -22.0, 0.28, -0.6, 0.8),
        bump(26, 2, -2.0, -14.0, 24.0, 0.32, 0.0, 1.0),
    };
    DefectRegion lip_box;
    lip_box.key_point = 25;
    lip_box.model_id = 9;
    lip_box.roll = {-30.0, -22.31};
    lip_box.pitch = {18.41, 30.0};
    lip_box.magnitude = 0.30;
    lip_box.dir_x = 0.6;
    lip_box.dir_y = 0.8;
    cfg.defects.push_back(lip_box);

    // Faint cone under the lip box, aligned with it. Peaks below the severe
    // threshold even with noise on top, so the box edge stays the only
    // severe boundary, but it gives hill climbers a trail into the corner.
    DefectRegion lip_trail;
    lip_trail.key_point = 25;
    lip_trail.model_id = 9;
    lip_trail.magnitude = 0.040;
    lip_trail.center_roll = -26.0;
    lip_trail.center_pitch = 24.0;
    lip_trail.center_yaw = 0.0;
    lip_trail.core_radius = 0.01;
    lip_trail.basin_height = 0.040;
    lip_trail.dir_x = 0.6;
    lip_trail.dir_y = 0.8;
    cfg.defects.push_back(lip_trail);

    return cfg;
}

}  // namespace kpsearch
