#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "hyalign/grid.hpp"
#include "hyalign/imgproc.hpp"
#include "hyalign/rng.hpp"

namespace hyalign {

// Two-modality procedural scene with known ground-truth alignment.
// landmarks_v[i] and landmarks_t[i] are corresponding (row, col) points;
// truth_field is the backward-warp field that produced the misaligned
// modality (zero for aligned pairs).
struct ScenePair {
    Grid V, T;
    std::vector<std::array<double, 2>> landmarks_v, landmarks_t; // (row, col)
    Grid truth_field;
};

enum class Modality { visible, thermal };

namespace detail {

inline void push_shape_landmarks(std::vector<std::array<double, 2>>& lm, double cy, double cx,
                                 double ry, double rx) {
    lm.push_back({cy, cx});
    for (int i = 0; i < 8; ++i) {
        double ang = static_cast<double>(i) * M_PI / 4.0;
        lm.push_back({cy + ry * std::sin(ang), cx + rx * std::cos(ang)});
    }
}

// Monotone nonlinear remap of region intensities standing in for the
// modality gap. Shape fills go through the curve exactly; the background
// continuum gets the curve's affine approximation around its mean level
// (the per-region reading: one intensity map per region).
inline double modality_curve(double v) { return 0.12 + 0.80 * std::pow(v, 1.7); }

inline double modality_curve_deriv(double v) {
    return 0.80 * 1.7 * std::pow(v, 0.7);
}

inline Grid box_blur3(const Grid& img) {
    const int64_t H = img.rows(), W = img.cols();
    Grid out = Grid::zeros(img.shape);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            double s = 0.0;
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx)
                    s += img.at(clamp_idx(y + dy, H), clamp_idx(x + dx, W));
            out.at(y, x) = s / 9.0;
        }
    return out;
}

// bilinear lookup of one field channel at a real-valued position
inline double sample_field(const Grid& field, double y, double x, int64_t k) {
    Bilinear b = bilinear_at(x, y, field.shape[0], field.shape[1]);
    double top = (1.0 - b.wx) * field.at(b.y0, b.x0, k) + b.wx * field.at(b.y0, b.x1, k);
    double bot = (1.0 - b.wx) * field.at(b.y1, b.x0, k) + b.wx * field.at(b.y1, b.x1, k);
    return (1.0 - b.wy) * top + b.wy * bot;
}

// A feature of the source image at s lands at the output position p solving
// p + field(p) = s under backward warping; smooth small fields make the map
// a contraction, so fixed-point iteration converges.
inline std::array<double, 2> track_landmark(const std::array<double, 2>& s, const Grid& field) {
    double py = s[0], px = s[1];
    for (int it = 0; it < 40; ++it) {
        double dx = sample_field(field, py, px, 0);
        double dy = sample_field(field, py, px, 1);
        py = s[0] - dy;
        px = s[1] - dx;
    }
    return {py, px};
}

} // namespace detail

// Seeded placement of filled rectangles/ellipses on a gradient background.
// V carries additive texture noise; T gets a monotone intensity remap plus a
// 3x3 box blur, preserving edge geometry while decorrelating intensities.
inline ScenePair gen_scene(uint64_t seed, int64_t H, int64_t W, int n_shapes) {
    if (H < 64 || W < 64) throw std::invalid_argument("gen_scene: degenerate dimensions");
    if (n_shapes < 1) throw std::invalid_argument("gen_scene: n_shapes < 1");
    Rng rng(seed);

    Grid base = Grid::zeros({H, W});
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            base.at(y, x) = 0.22 + 0.18 * static_cast<double>(x) / static_cast<double>(W - 1) +
                            0.08 * static_cast<double>(y) / static_cast<double>(H - 1);

    // background remap: affine approximation of the curve at the mean level
    const double bg_mean = 0.35;
    const double bg_a = detail::modality_curve(bg_mean);
    const double bg_b = detail::modality_curve_deriv(bg_mean);
    Grid base_t = base;
    for (double& v : base_t.data) v = bg_a + bg_b * (v - bg_mean);

    ScenePair pair;
    const double margin = 14.0;
    for (int s = 0; s < n_shapes; ++s) {
        bool rect = s == 0 ? true : rng.uniform() < 0.5;
        double ry = rng.uniform(static_cast<double>(H) / 12.0, static_cast<double>(H) / 5.0);
        double rx = rng.uniform(static_cast<double>(W) / 12.0, static_cast<double>(W) / 5.0);
        double cy = rng.uniform(margin + ry, static_cast<double>(H - 1) - margin - ry);
        double cx = rng.uniform(margin + rx, static_cast<double>(W - 1) - margin - rx);
        double fill = rng.uniform(0.55, 0.95);
        double fill_t = detail::modality_curve(fill);
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double uy = (static_cast<double>(y) - cy) / ry;
                double ux = (static_cast<double>(x) - cx) / rx;
                bool inside = rect ? (std::fabs(uy) <= 1.0 && std::fabs(ux) <= 1.0)
                                   : (uy * uy + ux * ux <= 1.0);
                if (inside) {
                    base.at(y, x) = fill;
                    base_t.at(y, x) = fill_t;
                }
            }
        detail::push_shape_landmarks(pair.landmarks_v, cy, cx, ry, rx);
    }
    pair.landmarks_t = pair.landmarks_v;

    // band-limited texture for V: coarse noise bilinearly upsampled, so it
    // survives resampling instead of acting like per-pixel speckle
    Grid texture_cg = Grid::zeros({(H + 7) / 8 + 1, (W + 7) / 8 + 1, 2});
    for (double& v : texture_cg.data) v = rng.uniform(-0.03, 0.03);
    Grid texture = upsample_field(texture_cg, H, W);
    pair.V = base;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            pair.V.at(y, x) = clamp01(pair.V.at(y, x) + texture.at(y, x, 0));

    pair.T = clamp01(detail::box_blur3(base_t));

    pair.truth_field = Grid::zeros({H, W, 2});
    return pair;
}

// Smooth random field: 4x4 control grid with entries uniform in
// [-magnitude, magnitude], bilinearly upsampled. Invertible (positive
// jacobian) for magnitudes up to ~8 px at 128x128.
inline Grid random_nonlinear_warp(uint64_t seed, int64_t H, int64_t W, double magnitude_px) {
    if (magnitude_px < 0.0) throw std::invalid_argument("random_nonlinear_warp: magnitude < 0");
    Rng rng(seed);
    Grid cg = Grid::zeros({4, 4, 2});
    for (double& v : cg.data) v = rng.uniform(-magnitude_px, magnitude_px);
    return upsample_field(cg, H, W);
}

// Constant horizontal shift of fraction * W pixels. The rigid protocol uses
// fractions of 0.5% to 1.5% of the image width.
inline Grid rigid_shift_field(int64_t H, int64_t W, double fraction) {
    if (fraction != 0.0 && (fraction < 0.005 || fraction > 0.015))
        std::cerr << "warning: rigid shift fraction " << fraction
                  << " outside the 0.005..0.015 protocol range\n";
    Grid f = Grid::zeros({H, W, 2});
    double dx = fraction * static_cast<double>(W);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) f.at(y, x, 0) = dx;
    return f;
}

// Warp the selected modality by the field; the truth field composes with any
// prior misalignment and the warped modality's landmarks move to their
// backward-warp positions.
inline ScenePair misalign(const ScenePair& pair, const Grid& field, Modality which) {
    require_same_shape(pair.truth_field, field, "misalign");
    ScenePair out = pair;
    Grid& img = which == Modality::thermal ? out.T : out.V;
    img = warp(img, field);
    std::vector<std::array<double, 2>>& lm =
        which == Modality::thermal ? out.landmarks_t : out.landmarks_v;
    for (auto& p : lm) p = detail::track_landmark(p, field);
    out.truth_field = compose_fields(pair.truth_field, field);
    return out;
}

// Endpoint errors of the misaligned modality's landmarks after applying a
// recovered alignment field (backward-warp convention), against the other
// modality's landmark positions. Passing a zero field gives the baseline.
inline std::vector<double> landmark_errors(const ScenePair& misaligned, const Grid& recovered,
                                           Modality warped = Modality::thermal) {
    const auto& moved =
        warped == Modality::thermal ? misaligned.landmarks_t : misaligned.landmarks_v;
    const auto& fixed =
        warped == Modality::thermal ? misaligned.landmarks_v : misaligned.landmarks_t;
    std::vector<double> errs;
    for (size_t i = 0; i < moved.size(); ++i) {
        std::array<double, 2> p = detail::track_landmark(moved[i], recovered);
        errs.push_back(std::hypot(p[0] - fixed[i][0], p[1] - fixed[i][1]));
    }
    return errs;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median_of: empty");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace hyalign
