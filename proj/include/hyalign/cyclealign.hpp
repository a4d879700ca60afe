#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hyalign/adamw.hpp"
#include "hyalign/autodiff.hpp"
#include "hyalign/grid.hpp"
#include "hyalign/imgproc.hpp"
#include "hyalign/losses.hpp"
#include "hyalign/poincare.hpp"
#include "hyalign/rng.hpp"

namespace hyalign {

// Ablation variants mirroring the experiment grid: Exp-I constrains in
// Euclidean space, Exp-II drops the backward (cycle) path, Exp-III/IV keep
// only one hierarchy level of the hyperbolic constraint.
enum class Ablation { none, euclidean_h2c, disable_cycle, h2c_pixel_only, h2c_edge_only };

inline const char* ablation_tag(Ablation a) {
    switch (a) {
        case Ablation::euclidean_h2c: return "Exp-I";
        case Ablation::disable_cycle: return "Exp-II";
        case Ablation::h2c_pixel_only: return "Exp-III";
        case Ablation::h2c_edge_only: return "Exp-IV";
        default: return "full";
    }
}

inline Ablation parse_ablation(const std::string& s) {
    if (s.empty() || s == "none") return Ablation::none;
    if (s == "euclidean_h2c") return Ablation::euclidean_h2c;
    if (s == "disable_cycle") return Ablation::disable_cycle;
    if (s == "h2c_pixel_only") return Ablation::h2c_pixel_only;
    if (s == "h2c_edge_only") return Ablation::h2c_edge_only;
    throw std::invalid_argument("unknown ablation: " + s);
}

struct AlignConfig {
    Curvature curvature{};      // c = 0.01
    Epsilon epsilon{};          // 1e-6
    int64_t grid_h = 8, grid_w = 8;
    int iterations = 500;
    double lr_field = 1e-2;
    double lr_disc = 1e-4;
    double lr_fusion = 1e-2;
    int fusion_steps = 100;
    double w_adv = 1.0, w_cc = 1.0, w_h2c = 1.0, w_sm = 1.0, w_f = 1.0;
    int64_t patch = 16;
    int64_t patch_count = 64;
    int64_t disc_hidden = 8;
    uint64_t seed = 0;
    Ablation ablation = Ablation::none;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("config: iterations < 1");
        if (!(lr_field > 0.0) || !(lr_disc > 0.0) || !(lr_fusion > 0.0))
            throw std::invalid_argument("config: learning rates must be positive");
        if (grid_h < 2 || grid_w < 2) throw std::invalid_argument("config: control grid below 2x2");
    }
};

struct DiscOptimizer {
    AdamWState w1, b1, w2, b2;
    static DiscOptimizer for_disc(const Discriminator& d, AdamWConfig c) {
        return DiscOptimizer{AdamWState::for_param(d.w1, c), AdamWState::for_param(d.b1, c),
                             AdamWState::for_param(d.w2, c), AdamWState::for_param(d.b2, c)};
    }
};

struct AlignState {
    Grid grid_t2v, grid_v2t; // control grids, zero = identity warp
    Discriminator disc_v, disc_t;
    AdamWState opt_t2v, opt_v2t;
    DiscOptimizer opt_disc_v, opt_disc_t;
    PatchPlan patches;
    Grid edges_V, edges_T; // Sobel maps of the fixed inputs
    int iteration = 0;
    std::vector<LossBreakdown> history;
    double last_d_v = 0.0, last_d_t = 0.0;
    int64_t H = 0, W = 0;
};

struct AlignResult {
    Grid T_v, V_t, T_vt, V_tv, F;
    Grid field_t2v, field_v2t;
    LossBreakdown final_loss;
    std::vector<LossBreakdown> history;
    double d_v = 0.0, d_t = 0.0;
};

inline AlignState init(const AlignConfig& cfg, const Grid& V, const Grid& T) {
    cfg.validate();
    require_same_shape(V, T, "init");
    if (V.shape.size() != 2) throw std::invalid_argument("init: images must be 2-D");
    for (double v : V.data)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("init: V outside [0, 1]");
    for (double v : T.data)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("init: T outside [0, 1]");

    AlignState st;
    st.H = V.rows();
    st.W = V.cols();
    st.grid_t2v = Grid::zeros({cfg.grid_h, cfg.grid_w, 2});
    st.grid_v2t = Grid::zeros({cfg.grid_h, cfg.grid_w, 2});

    Rng master(cfg.seed);
    uint64_t seed_dv = master.next_u64();
    uint64_t seed_dt = master.next_u64();
    uint64_t seed_patches = master.next_u64();
    st.disc_v = Discriminator::init(cfg.patch, cfg.disc_hidden, seed_dv);
    st.disc_t = Discriminator::init(cfg.patch, cfg.disc_hidden, seed_dt);
    st.patches = plan_patches(st.H, st.W, cfg.patch, cfg.patch_count, seed_patches);

    AdamWConfig fieldc;
    fieldc.lr = cfg.lr_field;
    st.opt_t2v = AdamWState::for_param(st.grid_t2v, fieldc);
    st.opt_v2t = AdamWState::for_param(st.grid_v2t, fieldc);
    AdamWConfig discc;
    discc.lr = cfg.lr_disc;
    st.opt_disc_v = DiscOptimizer::for_disc(st.disc_v, discc);
    st.opt_disc_t = DiscOptimizer::for_disc(st.disc_t, discc);

    st.edges_V = sobel_mag(V);
    st.edges_T = sobel_mag(T);
    return st;
}

namespace detail {

inline void step_discriminator(Discriminator& d, DiscOptimizer& opt, const Grid& real_edges,
                               const Grid& fake_edges, const PatchPlan& plan, double& d_value) {
    Tape t;
    DiscVars dv = lift(t, d, true);
    AdvLosses a = adv_loss(dv, t.leaf(real_edges), t.leaf(fake_edges), plan);
    d_value = t.value(a.d_loss).data[0];
    t.backward(a.d_loss);
    Grid g1 = t.grad(dv.w1), g2 = t.grad(dv.b1), g3 = t.grad(dv.w2), g4 = t.grad(dv.b2);
    adamw_step(d.w1, g1, opt.w1);
    adamw_step(d.b1, g2, opt.b1);
    adamw_step(d.w2, g3, opt.w2);
    adamw_step(d.b2, g4, opt.b2);
}

template <class Fn>
inline Var guarded(const char* term, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError& e) {
        throw NumericError(std::string("loss term '") + term + "' failed: " + e.what());
    }
}

} // namespace detail

// One alternating iteration: (a) discriminator ascent on (real, fake) edge
// pairs, (b) field descent on the generator objective with discriminators
// frozen. Returns the breakdown evaluated for the field update (f slot is
// zero; fusion runs after registration).
inline LossBreakdown step(AlignState& st, const Grid& V, const Grid& T, const AlignConfig& cfg) {
    const bool cycle = cfg.ablation != Ablation::disable_cycle;
    const H2cSpace space =
        cfg.ablation == Ablation::euclidean_h2c ? H2cSpace::euclidean : H2cSpace::hyperbolic;
    const bool use_edge = cfg.ablation != Ablation::h2c_pixel_only;
    const bool use_pixel = cfg.ablation != Ablation::h2c_edge_only;

    // (a) discriminator updates on current warps, fields held fixed
    {
        Grid f = upsample_field(st.grid_t2v, st.H, st.W);
        Grid Tv = warp(T, f);
        detail::step_discriminator(st.disc_v, st.opt_disc_v, st.edges_V, sobel_mag(Tv),
                                   st.patches, st.last_d_v);
        if (cycle) {
            Grid b = upsample_field(st.grid_v2t, st.H, st.W);
            Grid Vt = warp(V, b);
            detail::step_discriminator(st.disc_t, st.opt_disc_t, st.edges_T, sobel_mag(Vt),
                                       st.patches, st.last_d_t);
        }
    }

    // (b) field update against the frozen discriminators
    Tape t;
    Var g_t2v = t.leaf(st.grid_t2v, true);
    Var g_v2t = t.leaf(st.grid_v2t, cycle);
    Var Vc = t.leaf(V);
    Var Tc = t.leaf(T);
    Var f = upsample_field(g_t2v, st.H, st.W);
    Var b = upsample_field(g_v2t, st.H, st.W);
    Var Tv = warp(Tc, f);
    Var Vt = warp(Vc, b);
    Var eTv = sobel_mag(Tv);
    Var eV = t.leaf(st.edges_V);
    Var eT = t.leaf(st.edges_T);

    DiscVars dv = lift(t, st.disc_v, false);
    Var adv = detail::guarded("adv", [&] {
        Var g = adv_loss(dv, eV, eTv, st.patches).g_loss;
        if (cycle) {
            DiscVars dt = lift(t, st.disc_t, false);
            Var eVt = sobel_mag(Vt);
            g = g + adv_loss(dt, eT, eVt, st.patches).g_loss;
        }
        return g;
    });

    Var cc = detail::guarded("cc", [&] {
        if (!cycle) return t.scalar(0.0);
        Var Tvt = warp(Tv, b);
        Var Vtv = warp(Vt, f);
        return cycle_loss(Tc, Tvt, Vc, Vtv);
    });

    Var h2c = detail::guarded("h2c", [&] {
        std::vector<Var> terms;
        if (use_edge) terms.push_back(h2c_edge_from_maps(eTv, eV, cfg.curvature, cfg.epsilon, space));
        if (use_pixel) terms.push_back(h2c_pixel(Tv, Vc, cfg.curvature, cfg.epsilon, space));
        if (cycle) {
            if (use_edge) {
                Var eVt2 = sobel_mag(Vt);
                terms.push_back(h2c_edge_from_maps(eVt2, eT, cfg.curvature, cfg.epsilon, space));
            }
            if (use_pixel) terms.push_back(h2c_pixel(Vt, Tc, cfg.curvature, cfg.epsilon, space));
        }
        return t.add_n(terms);
    });

    // The smoothness penalty runs over the field parameters: the control
    // grid IS the deformation field here, so it couples adjacent control
    // points directly (the dense field, being its interpolation, is smooth
    // by construction). With both directions active the two penalties are
    // averaged.
    Var sm = detail::guarded("sm", [&] {
        if (!cycle) return smooth_loss(g_t2v);
        return 0.5 * (smooth_loss(g_t2v) + smooth_loss(g_v2t));
    });

    Var objective = cfg.w_adv * adv + cfg.w_cc * cc + cfg.w_h2c * h2c + cfg.w_sm * sm;
    t.backward(objective);

    Grid gf = t.grad(g_t2v);
    adamw_step(st.grid_t2v, gf, st.opt_t2v);
    if (cycle) {
        Grid gb = t.grad(g_v2t);
        adamw_step(st.grid_v2t, gb, st.opt_v2t);
    }
    require_finite(st.grid_t2v, "field t2v after update");
    require_finite(st.grid_v2t, "field v2t after update");

    LossBreakdown bd = make_breakdown(t.value(adv).data[0], t.value(cc).data[0],
                                      t.value(h2c).data[0], t.value(sm).data[0], 0.0);
    st.history.push_back(bd);
    st.iteration += 1;
    return bd;
}

// Loss breakdown at the current state, no parameter updates (f slot filled
// only when a fused image is supplied).
inline LossBreakdown evaluate_losses(const AlignState& st, const Grid& V, const Grid& T,
                                     const AlignConfig& cfg, const Grid* fused = nullptr) {
    const bool cycle = cfg.ablation != Ablation::disable_cycle;
    const H2cSpace space =
        cfg.ablation == Ablation::euclidean_h2c ? H2cSpace::euclidean : H2cSpace::hyperbolic;
    const bool use_edge = cfg.ablation != Ablation::h2c_pixel_only;
    const bool use_pixel = cfg.ablation != Ablation::h2c_edge_only;

    Tape t;
    Var Vc = t.leaf(V), Tc = t.leaf(T);
    Var f = upsample_field(t.leaf(st.grid_t2v), st.H, st.W);
    Var b = upsample_field(t.leaf(st.grid_v2t), st.H, st.W);
    Var Tv = warp(Tc, f);
    Var Vt = warp(Vc, b);
    Var eTv = sobel_mag(Tv);
    Var eV = t.leaf(st.edges_V);
    Var eT = t.leaf(st.edges_T);

    DiscVars dvv = lift(t, st.disc_v, false);
    double adv = t.value(adv_loss(dvv, eV, eTv, st.patches).g_loss).data[0];
    if (cycle) {
        DiscVars dtt = lift(t, st.disc_t, false);
        adv += t.value(adv_loss(dtt, eT, sobel_mag(Vt), st.patches).g_loss).data[0];
    }

    double cc = 0.0;
    if (cycle)
        cc = t.value(cycle_loss(Tc, warp(Tv, b), Vc, warp(Vt, f))).data[0];

    double h2c = 0.0;
    if (use_edge)
        h2c += t.value(h2c_edge_from_maps(eTv, eV, cfg.curvature, cfg.epsilon, space)).data[0];
    if (use_pixel) h2c += t.value(h2c_pixel(Tv, Vc, cfg.curvature, cfg.epsilon, space)).data[0];
    if (cycle) {
        if (use_edge)
            h2c += t.value(h2c_edge_from_maps(sobel_mag(Vt), eT, cfg.curvature, cfg.epsilon, space))
                       .data[0];
        if (use_pixel) h2c += t.value(h2c_pixel(Vt, Tc, cfg.curvature, cfg.epsilon, space)).data[0];
    }

    double sm = t.value(smooth_loss(t.leaf(st.grid_t2v))).data[0];
    if (cycle) sm = 0.5 * (sm + t.value(smooth_loss(t.leaf(st.grid_v2t))).data[0]);

    double fl = 0.0;
    if (fused != nullptr)
        fl = t.value(fusion_loss(t.leaf(*fused), Tv, Vc)).data[0];

    return make_breakdown(adv, cc, h2c, sm, fl);
}

// Direct optimization of the fusion objective: start from the per-pixel max
// composite, refine the pixels with AdamW (no weight decay: a zero-gradient
// start must stay put), clamp to [0, 1] at export.
inline Grid fuse(const Grid& Tv, const Grid& V, const AlignConfig& cfg) {
    require_same_shape(Tv, V, "fuse");
    Grid F = max_image(Tv, V);
    Grid pix_target = F;
    Grid grad_target = max_image(sobel_mag(Tv), sobel_mag(V));
    AdamWConfig oc;
    oc.lr = cfg.lr_fusion;
    oc.weight_decay = 0.0;
    AdamWState opt = AdamWState::for_param(F, oc);
    for (int i = 0; i < cfg.fusion_steps; ++i) {
        Tape t;
        Var Fv = t.leaf(F, true);
        Var loss = fusion_loss_to_targets(Fv, t.leaf(pix_target), t.leaf(grad_target));
        t.backward(loss);
        Grid g = t.grad(Fv);
        adamw_step(F, g, opt);
    }
    return clamp01(std::move(F));
}

// Full pipeline: init, cfg.iterations alternating steps, then fusion.
inline AlignResult register_pair(const Grid& V, const Grid& T, const AlignConfig& cfg) {
    AlignState st = init(cfg, V, T);
    for (int i = 0; i < cfg.iterations; ++i) step(st, V, T, cfg);

    AlignResult res;
    res.field_t2v = upsample_field(st.grid_t2v, st.H, st.W);
    res.field_v2t = upsample_field(st.grid_v2t, st.H, st.W);
    res.T_v = warp(T, res.field_t2v);
    res.V_t = warp(V, res.field_v2t);
    res.T_vt = warp(res.T_v, res.field_v2t);
    res.V_tv = warp(res.V_t, res.field_t2v);
    res.F = fuse(res.T_v, V, cfg);
    res.T_v = clamp01(std::move(res.T_v));
    res.V_t = clamp01(std::move(res.V_t));
    res.T_vt = clamp01(std::move(res.T_vt));
    res.V_tv = clamp01(std::move(res.V_tv));
    res.final_loss = evaluate_losses(st, V, T, cfg, &res.F);
    res.history = std::move(st.history);
    res.d_v = st.last_d_v;
    res.d_t = st.last_d_t;
    return res;
}

} // namespace hyalign
