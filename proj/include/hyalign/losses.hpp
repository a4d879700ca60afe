#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hyalign/adamw.hpp"
#include "hyalign/autodiff.hpp"
#include "hyalign/grid.hpp"
#include "hyalign/imgproc.hpp"
#include "hyalign/poincare.hpp"
#include "hyalign/rng.hpp"

namespace hyalign {

struct LossBreakdown {
    double adv = 0.0;
    double cc = 0.0;
    double h2c = 0.0;
    double sm = 0.0;
    double f = 0.0;
    double total = 0.0;
};

inline LossBreakdown make_breakdown(double adv, double cc, double h2c, double sm, double f) {
    LossBreakdown b{adv, cc, h2c, sm, f, 0.0};
    b.total = adv + cc + h2c + sm + f;
    return b;
}

inline double total_loss(const LossBreakdown& b) { return b.adv + b.cc + b.h2c + b.sm + b.f; }

// Two-layer affine-sigmoid classifier over flattened edge patches.
struct Discriminator {
    int64_t patch = 16;
    int64_t hidden = 8;
    Grid w1, b1, w2, b2;

    static Discriminator init(int64_t patch, int64_t hidden, uint64_t seed) {
        Discriminator d;
        d.patch = patch;
        d.hidden = hidden;
        d.w1 = Grid::zeros({hidden, patch * patch});
        d.b1 = Grid::zeros({hidden});
        d.w2 = Grid::zeros({1, hidden});
        d.b2 = Grid::zeros({1});
        Rng rng(seed);
        for (double& v : d.w1.data) v = rng.uniform(-0.05, 0.05);
        for (double& v : d.b1.data) v = rng.uniform(-0.05, 0.05);
        for (double& v : d.w2.data) v = rng.uniform(-0.05, 0.05);
        for (double& v : d.b2.data) v = rng.uniform(-0.05, 0.05);
        return d;
    }
};

struct DiscVars {
    Var w1, b1, w2, b2;
};

inline DiscVars lift(Tape& t, const Discriminator& d, bool trainable) {
    return DiscVars{t.leaf(d.w1, trainable), t.leaf(d.b1, trainable), t.leaf(d.w2, trainable),
                    t.leaf(d.b2, trainable)};
}

// pre-sigmoid output; probability is sigmoid(logit), kept implicit so the
// losses can use the stable softplus forms
inline Var disc_logit(const DiscVars& d, Var patch_vec) {
    Tape& t = *patch_vec.tape;
    Var h = t.sigmoid(t.affine(d.w1, patch_vec, d.b1));
    return t.affine(d.w2, h, d.b2);
}

// Fixed patch locations: stride-grid candidates, seeded subset of `count`.
struct PatchPlan {
    int64_t patch = 16;
    std::vector<std::pair<int64_t, int64_t>> corners;
};

inline PatchPlan plan_patches(int64_t H, int64_t W, int64_t patch, int64_t count, uint64_t seed) {
    if (patch > H || patch > W)
        throw std::invalid_argument("plan_patches: patch size exceeds image");
    int64_t stride = std::max<int64_t>(1, patch / 2);
    std::vector<int64_t> rows, cols;
    for (int64_t r = 0; r + patch <= H; r += stride) rows.push_back(r);
    if (rows.back() != H - patch) rows.push_back(H - patch);
    for (int64_t c = 0; c + patch <= W; c += stride) cols.push_back(c);
    if (cols.back() != W - patch) cols.push_back(W - patch);
    std::vector<std::pair<int64_t, int64_t>> cand;
    for (int64_t r : rows)
        for (int64_t c : cols) cand.emplace_back(r, c);
    PatchPlan plan;
    plan.patch = patch;
    Rng rng(seed);
    for (int64_t i : rng.sample_without_replacement(static_cast<int64_t>(cand.size()), count))
        plan.corners.push_back(cand[static_cast<size_t>(i)]);
    return plan;
}

struct AdvLosses {
    Var d_loss; // -mean[log d(real) + log(1 - d(fake))]
    Var g_loss; // -mean[log d(fake)]  (non-saturating)
};

inline AdvLosses adv_loss(const DiscVars& d, Var real_edges, Var fake_edges,
                          const PatchPlan& plan) {
    Tape& t = *real_edges.tape;
    require_same_shape(t.value(real_edges), t.value(fake_edges), "adv_loss");
    std::vector<Var> dterms, gterms;
    dterms.reserve(plan.corners.size());
    gterms.reserve(plan.corners.size());
    for (auto [r, c] : plan.corners) {
        Var pr = t.block2d(real_edges, r, c, plan.patch, plan.patch);
        Var pf = t.block2d(fake_edges, r, c, plan.patch, plan.patch);
        Var zr = disc_logit(d, pr);
        Var zf = disc_logit(d, pf);
        dterms.push_back(t.softplus(t.neg(zr)) + t.softplus(zf));
        gterms.push_back(t.softplus(t.neg(zf)));
    }
    double inv = 1.0 / static_cast<double>(plan.corners.size());
    return AdvLosses{inv * t.add_n(dterms), inv * t.add_n(gterms)};
}

inline Var cycle_loss(Var T, Var T_vt, Var V, Var V_tv) {
    Tape& t = *T.tape;
    require_same_shape(t.value(T), t.value(T_vt), "cycle_loss");
    require_same_shape(t.value(V), t.value(V_tv), "cycle_loss");
    return t.mean(t.abs(T_vt - T)) + t.mean(t.abs(V_tv - V));
}

enum class H2cSpace { hyperbolic, euclidean };

// Block descriptor: flattened block shifted to zero mean, then softly
// rescaled toward the norm 0.7/sqrt(c). The scale floor kappa keeps
// near-empty blocks near the origin instead of blowing their noise up to
// full radius, and the fixed target keeps strong blocks off the tanh
// saturation zone, so the constraint compares patterns rather than
// magnitudes.
inline Var block_descriptor(Var block_vec, Curvature k) {
    Tape& t = *block_vec.tape;
    const double target = 0.7 / std::sqrt(k.c);
    const double kappa = 1.0;
    Var centered = t.center(block_vec);
    Var factor = t.div(t.scalar(target), t.shift(t.vec_norm(centered), kappa));
    return t.mul(centered, factor);
}

// softplus of the constraint distance between two descriptors; the hyperbolic
// route embeds into the ball first, the Euclidean ablation takes the plain
// norm on the same prepared descriptors
inline Var descriptor_similarity(Var da, Var db, Curvature k, Epsilon eps, H2cSpace space) {
    Tape& t = *da.tape;
    Var d = space == H2cSpace::hyperbolic
                ? poincare_dist(ball_embed(da, k, eps), ball_embed(db, k, eps), k)
                : t.vec_norm(da - db);
    return t.softplus(d);
}

// Per-block constraint: both maps are cut into non-overlapping blocks, each
// block turned into a descriptor and compared; the per-block losses are
// averaged.
inline Var block_similarity(Var a, Var b, Curvature k, Epsilon eps, H2cSpace space,
                            int64_t block = 16) {
    Tape& t = *a.tape;
    const Grid& va = t.value(a);
    require_same_shape(va, t.value(b), "block_similarity");
    const int64_t H = va.rows(), W = va.cols();
    std::vector<Var> terms;
    for (int64_t r0 = 0; r0 < H; r0 += block)
        for (int64_t c0 = 0; c0 < W; c0 += block) {
            int64_t h = std::min(block, H - r0), w = std::min(block, W - c0);
            Var da = block_descriptor(t.block2d(a, r0, c0, h, w), k);
            Var db = block_descriptor(t.block2d(b, r0, c0, h, w), k);
            terms.push_back(descriptor_similarity(da, db, k, eps, space));
        }
    return (1.0 / static_cast<double>(terms.size())) * t.add_n(terms);
}

inline Var h2c_edge_from_maps(Var edges_a, Var edges_b, Curvature k, Epsilon eps,
                              H2cSpace space = H2cSpace::hyperbolic) {
    return block_similarity(edges_a, edges_b, k, eps, space);
}

// edge-level constraint: Sobel maps embedded block-wise into the ball
inline Var h2c_edge(Var Tv, Var V, Curvature k, Epsilon eps = {},
                    H2cSpace space = H2cSpace::hyperbolic) {
    return h2c_edge_from_maps(sobel_mag(Tv), sobel_mag(V), k, eps, space);
}

// pixel-level constraint: 4x average-pooled intensities, block-embedded
inline Var h2c_pixel(Var Tv, Var V, Curvature k, Epsilon eps = {},
                     H2cSpace space = H2cSpace::hyperbolic) {
    return block_similarity(avgpool(Tv, 4), avgpool(V, 4), k, eps, space);
}

// both hierarchy levels over both direction pairs (Tv, V) and (Vt, T)
inline Var h2c_total(Var Tv, Var V, Var T, Var Vt, Curvature k, Epsilon eps = {},
                     H2cSpace space = H2cSpace::hyperbolic) {
    Tape& t = *Tv.tape;
    return t.add_n({h2c_edge(Tv, V, k, eps, space), h2c_pixel(Tv, V, k, eps, space),
                    h2c_edge(Vt, T, k, eps, space), h2c_pixel(Vt, T, k, eps, space)});
}

// field smoothness, normalized by pixel count
inline Var smooth_loss(Var field) {
    Tape& t = *field.tape;
    const Grid& vf = t.value(field);
    double n = static_cast<double>(vf.shape[0] * vf.shape[1]);
    return (1.0 / n) * field_sq_grad(field);
}

inline Var fusion_loss_to_targets(Var F, Var pix_target, Var grad_target) {
    Tape& t = *F.tape;
    return t.mean(t.abs(F - pix_target)) + t.mean(t.abs(sobel_mag(F) - grad_target));
}

// intensity term toward max(Tv, V) plus gradient term toward the max of the
// Sobel magnitudes
inline Var fusion_loss(Var F, Var Tv, Var V) {
    Tape& t = *F.tape;
    require_same_shape(t.value(F), t.value(Tv), "fusion_loss");
    require_same_shape(t.value(F), t.value(V), "fusion_loss");
    Var pix_target = t.maximum(Tv, V);
    Var grad_target = t.maximum(sobel_mag(Tv), sobel_mag(V));
    return fusion_loss_to_targets(F, pix_target, grad_target);
}

// ---- plain-value wrappers (evaluation without gradients) ----

inline double cycle_loss(const Grid& T, const Grid& T_vt, const Grid& V, const Grid& V_tv) {
    Tape t;
    return t.value(cycle_loss(t.leaf(T), t.leaf(T_vt), t.leaf(V), t.leaf(V_tv))).data[0];
}

inline double h2c_edge(const Grid& Tv, const Grid& V, Curvature k, Epsilon eps = {},
                       H2cSpace space = H2cSpace::hyperbolic) {
    Tape t;
    return t.value(h2c_edge(t.leaf(Tv), t.leaf(V), k, eps, space)).data[0];
}

inline double h2c_pixel(const Grid& Tv, const Grid& V, Curvature k, Epsilon eps = {},
                        H2cSpace space = H2cSpace::hyperbolic) {
    Tape t;
    return t.value(h2c_pixel(t.leaf(Tv), t.leaf(V), k, eps, space)).data[0];
}

inline double h2c_total(const Grid& Tv, const Grid& V, const Grid& T, const Grid& Vt, Curvature k,
                        Epsilon eps = {}, H2cSpace space = H2cSpace::hyperbolic) {
    Tape t;
    return t.value(h2c_total(t.leaf(Tv), t.leaf(V), t.leaf(T), t.leaf(Vt), k, eps, space)).data[0];
}

inline double smooth_loss(const Grid& field) {
    Tape t;
    return t.value(smooth_loss(t.leaf(field))).data[0];
}

inline double fusion_loss(const Grid& F, const Grid& Tv, const Grid& V) {
    Tape t;
    return t.value(fusion_loss(t.leaf(F), t.leaf(Tv), t.leaf(V))).data[0];
}

struct AdvLossValues {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

inline AdvLossValues adv_loss(const Discriminator& d, const Grid& real_edges,
                              const Grid& fake_edges, const PatchPlan& plan) {
    Tape t;
    DiscVars dv = lift(t, d, false);
    AdvLosses a = adv_loss(dv, t.leaf(real_edges), t.leaf(fake_edges), plan);
    return AdvLossValues{t.value(a.d_loss).data[0], t.value(a.g_loss).data[0]};
}

} // namespace hyalign
