// Acceptance suite: one line per criterion, nonzero exit if any hard
// criterion fails. The CLI binary path is argv[1] (used by the sweep and
// determinism criteria).

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "hyalign/adamw.hpp"
#include "hyalign/autodiff.hpp"
#include "hyalign/cyclealign.hpp"
#include "hyalign/imgproc.hpp"
#include "hyalign/io.hpp"
#include "hyalign/losses.hpp"
#include "hyalign/metrics.hpp"
#include "hyalign/numdiff.hpp"
#include "hyalign/poincare.hpp"
#include "hyalign/rng.hpp"
#include "hyalign/synth.hpp"

namespace fs = std::filesystem;
using namespace hyalign;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& what, const std::string& detail) {
    std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", idx, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> rand_point(Rng& rng, size_t dim, double max_norm) {
    std::vector<double> p(dim);
    double n2 = 0.0;
    for (double& v : p) {
        v = rng.uniform(-1.0, 1.0);
        n2 += v * v;
    }
    double target = rng.uniform(0.0, max_norm);
    double s = n2 > 0.0 ? target / std::sqrt(n2) : 0.0;
    for (double& v : p) v *= s;
    return p;
}

double norm_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// ---- criterion 1: geometry suite ----
void criterion_geometry() {
    auto t0 = Clock::now();
    bool ok = true;
    std::string why = "ok";
    for (double c : {1.0, 0.1, 0.01}) {
        Curvature k(c);
        Rng rng(static_cast<uint64_t>(1e4 * c) + 3);
        for (int i = 0; i < 1000 && ok; ++i) {
            size_t d = 2 + static_cast<size_t>(rng.below(4));
            BallPoint m{rand_point(rng, d, 0.95 * k.radius()), k};
            BallPoint n{rand_point(rng, d, 0.95 * k.radius()), k};
            BallPoint e{rand_point(rng, d, 0.95 * k.radius()), k};
            BallPoint zero{std::vector<double>(d, 0.0), k};
            if (euclid_dist(mobius_add(zero, n).coords, n.coords) >= 1e-9) {
                ok = false;
                why = "left identity";
            }
            std::vector<double> negm = m.coords;
            for (double& v : negm) v = -v;
            if (norm_of(mobius_add(m, BallPoint{negm, k}).coords) >= 1e-9) {
                ok = false;
                why = "left inverse";
            }
            if (norm_of(mobius_add(m, n).coords) > (1.0 - 1e-6) * k.radius() * (1.0 + 1e-12)) {
                ok = false;
                why = "ball containment";
            }
            if (std::fabs(dist(m, n) - dist(n, m)) > 1e-12) {
                ok = false;
                why = "symmetry";
            }
            if (dist(m, e) > dist(m, n) + dist(n, e) + 1e-9) {
                ok = false;
                why = "triangle inequality";
            }
        }
    }
    double secs = seconds_since(t0);
    if (secs >= 5.0) {
        ok = false;
        why = "too slow";
    }
    report(1, ok, "geometry suite (identities, containment, metric axioms)",
           why + ", " + std::to_string(secs).substr(0, 4) + " s");
}

// ---- criterion 2: artanh vs arcosh form ----
void criterion_distance_forms() {
    Curvature one(1.0);
    Rng rng(19);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        size_t d = 2 + static_cast<size_t>(rng.below(4));
        BallPoint u{rand_point(rng, d, 0.99), one};
        BallPoint v{rand_point(rng, d, 0.99), one};
        worst = std::max(worst, std::fabs(dist(u, v) - dist_arcosh_c1(u, v)));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max |diff| = %.2e", worst);
    report(2, worst <= 1e-9, "artanh-form distance equals the arcosh form at c=1", buf);
}

// ---- criterion 3: sensitivity ratio sweep ----
void criterion_theorem(const std::string& cli) {
    auto t0 = Clock::now();
    bool ok = true;
    std::string why = "ok";
    std::vector<double> norms = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
    std::vector<TheoremRow> rows = theorem_sweep(norms);
    double prev = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (std::fabs(rows[i].measured_ratio - rows[i].analytic_ratio) >
            0.02 * rows[i].analytic_ratio) {
            ok = false;
            why = "2% tolerance";
        }
        if (i > 0 && !(rows[i].measured_ratio > prev)) {
            ok = false;
            why = "monotonicity";
        }
        prev = rows[i].measured_ratio;
    }
    GradRatioMeasurement rim = measure_grad_ratio({0.999, 0.0});
    if (!(rim.measured > 100.0)) {
        ok = false;
        why = "divergence at 0.999";
    }
    if (!cli.empty()) {
        fs::path d = fs::temp_directory_path() / "hyalign_acc_theorem";
        fs::remove_all(d);
        std::string cmd = cli + " theorem --out-dir " + d.string() + " >/dev/null 2>/dev/null";
        int rc = WEXITSTATUS(std::system(cmd.c_str()));
        if (rc != 0) {
            ok = false;
            why = "cmd_theorem exit " + std::to_string(rc);
        }
    }
    double secs = seconds_since(t0);
    if (secs >= 10.0) {
        ok = false;
        why = "too slow";
    }
    report(3, ok, "sensitivity ratio matches 2/(1-r^2) within 2%, increasing, >100 at 0.999",
           why + ", " + std::to_string(secs).substr(0, 4) + " s");
}

// ---- criterion 4: taylor bound ----
void criterion_taylor() {
    Curvature one(1.0);
    Rng rng(301);
    double worst = 0.0;
    int checked = 0;
    while (checked < 1000) {
        size_t d = 2 + static_cast<size_t>(rng.below(3));
        std::vector<double> u = rand_point(rng, d, 0.99);
        double uu = 0.0;
        for (double v : u) uu += v * v;
        std::vector<double> dir = rand_point(rng, d, 1.0);
        double dn = norm_of(dir);
        if (dn == 0.0) continue;
        double len = rng.uniform(0.0, 1.0) * 0.01 * (1.0 - uu);
        if (len == 0.0) continue;
        std::vector<double> v = u;
        for (size_t k = 0; k < d; ++k) v[k] += dir[k] / dn * len;
        if (norm_of(v) >= 1.0) continue;
        BallPoint up{u, one}, vp{v, one};
        double exact = dist_arcosh_c1(up, vp);
        if (exact == 0.0) continue;
        worst = std::max(worst, std::fabs(taylor_dist(up, vp) - exact) / exact);
        ++checked;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst rel err = %.4f%%", 100.0 * worst);
    report(4, worst <= 0.01, "taylor form within 1% where ||u-v|| <= 0.01 (1-||u||^2)", buf);
}

// ---- criterion 5: autodiff oracle over every differentiable operation ----
template <class Build>
double grad_check(const Grid& x0, Build build, double h = 1e-6) {
    Tape t;
    Var x = t.leaf(x0, true);
    Var y = build(t, x);
    t.backward(y);
    Grid ad = t.grad(x);
    auto f = [&](const Grid& g) {
        Tape tt;
        return tt.value(build(tt, tt.leaf(g))).data[0];
    };
    Grid fd = finite_diff_gradient(f, x0, h);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < fd.data.size(); ++i) {
        num = std::max(num, std::fabs(ad.data[i] - fd.data[i]));
        den = std::max(den, std::fabs(fd.data[i]));
    }
    return num / (den + 1e-10);
}

void criterion_autodiff() {
    auto t0 = Clock::now();
    Curvature k(0.01);
    Curvature one(1.0);
    Epsilon eps;
    double worst = 0.0;
    std::string worst_op = "none";
    auto note = [&](const char* op, double rel) {
        if (rel > worst) {
            worst = rel;
            worst_op = op;
        }
    };

    Rng rng(5005);
    for (int i = 0; i < 100; ++i) {
        // geometry
        Grid m0 = Grid::from({4}, rand_point(rng, 4, 0.9 * k.radius()));
        Grid n0 = Grid::from({4}, rand_point(rng, 4, 0.9 * k.radius()));
        note("poincare_dist", grad_check(m0, [&](Tape& t, Var m) {
                 return poincare_dist(m, t.leaf(n0), k);
             }));
        note("mobius_add", grad_check(m0, [&](Tape& t, Var m) {
                 return t.vec_norm(mobius_add(m, t.leaf(n0), k));
             }));
        Grid x0 = Grid::from({5}, rand_point(rng, 5, 3.0));
        note("ball_embed", grad_check(x0, [&](Tape& t, Var x) {
                 return t.vec_norm(ball_embed(x, one));
             }));
        note("euclid_dist", grad_check(m0, [&](Tape& t, Var u) {
                 return euclid_dist(u, t.leaf(n0));
             }));

        // image operators
        Grid img = Grid::zeros({10, 11});
        for (double& v : img.data) v = rng.uniform(0.0, 1.0);
        Grid img2 = Grid::zeros({10, 11});
        for (double& v : img2.data) v = rng.uniform(0.0, 1.0);
        Grid field = Grid::zeros({10, 11, 2});
        for (int64_t y = 0; y < 10; ++y)
            for (int64_t x = 0; x < 11; ++x) {
                field.at(y, x, 0) = rng.uniform(0.15, 0.85) * (x < 6 ? 1.0 : -1.0);
                field.at(y, x, 1) = rng.uniform(0.15, 0.85) * (y < 5 ? 1.0 : -1.0);
            }
        note("warp/img", grad_check(img, [&](Tape& t, Var im) {
                 return t.mean(warp(im, t.leaf(field)));
             }));
        note("warp/field", grad_check(field, [&](Tape& t, Var f) {
                 return t.mean(t.square(warp(t.leaf(img), f)));
             }));
        note("sobel", grad_check(img, [&](Tape& t, Var im) { return t.mean(sobel_mag(im)); }));
        Grid cg = Grid::zeros({3, 3, 2});
        for (double& v : cg.data) v = rng.uniform(-1.0, 1.0);
        note("upsample_field", grad_check(cg, [&](Tape& t, Var g) {
                 return t.mean(t.square(upsample_field(g, 10, 11)));
             }));
        note("field_spatial_grad", grad_check(cg, [&](Tape& t, Var g) {
                 return field_sq_grad(g);
             }));

        // losses
        note("cycle_loss", grad_check(img, [&](Tape& t, Var x) {
                 return cycle_loss(t.leaf(img2), x, t.leaf(img2), t.leaf(img2));
             }));
        note("h2c_edge", grad_check(img, [&](Tape& t, Var x) {
                 return h2c_edge(x, t.leaf(img2), k, eps);
             }));
        note("h2c_pixel", grad_check(img, [&](Tape& t, Var x) {
                 return h2c_pixel(x, t.leaf(img2), k, eps);
             }));
        note("smooth_loss", grad_check(cg, [&](Tape& t, Var f) { return smooth_loss(f); }));
        note("fusion_loss", grad_check(img, [&](Tape& t, Var x) {
                 return fusion_loss(x, t.leaf(img2), t.leaf(img2));
             }));
        Discriminator d = Discriminator::init(8, 6, 900 + static_cast<uint64_t>(i));
        PatchPlan plan = plan_patches(10, 11, 8, 4, 17);
        note("adv_loss/fake", grad_check(img, [&](Tape& t, Var x) {
                 DiscVars dv = lift(t, d, false);
                 return adv_loss(dv, t.leaf(img2), x, plan).g_loss;
             }));
        note("adv_loss/weights", grad_check(d.w1, [&](Tape& t, Var w1) {
                 DiscVars dv{w1, t.leaf(d.b1), t.leaf(d.w2), t.leaf(d.b2)};
                 return adv_loss(dv, t.leaf(img2), t.leaf(img), plan).d_loss;
             }));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst rel = %.2e (%s), %.0f s", worst, worst_op.c_str(),
                  seconds_since(t0));
    report(5, worst <= 1e-5, "reverse-mode gradients match finite differences (100 inputs/op)",
           buf);
}

// ---- criterion 6: loss floors and canonical minimizers ----
void criterion_loss_floors() {
    Curvature k(0.01);
    bool ok = true;
    std::string why = "ok";
    const double ln2 = std::log(2.0);
    Rng rng(606);
    for (int i = 0; i < 10; ++i) {
        Grid a = Grid::zeros({24, 24});
        for (double& v : a.data) v = rng.uniform(0.0, 1.0);
        Grid b = Grid::zeros({24, 24});
        for (double& v : b.data) v = rng.uniform(0.0, 1.0);
        if (h2c_edge(a, b, k) < ln2 || h2c_pixel(a, b, k) < ln2) {
            ok = false;
            why = "floor violated";
        }
        if (std::fabs(h2c_edge(a, a, k) - ln2) > 1e-12 ||
            std::fabs(h2c_pixel(a, a, k) - ln2) > 1e-12 ||
            std::fabs(h2c_total(a, a, a, a, k) - 4.0 * ln2) > 1e-12) {
            ok = false;
            why = "identical-input equality";
        }
        if (cycle_loss(a, a, b, b) != 0.0) {
            ok = false;
            why = "cycle minimizer";
        }
        if (smooth_loss(Grid::zeros({6, 6, 2})) != 0.0) {
            ok = false;
            why = "smooth minimizer";
        }
        Grid lo = Grid::zeros({24, 24});
        if (fusion_loss(a, a, lo) != 0.0) {
            ok = false;
            why = "fusion minimizer";
        }
    }
    report(6, ok, "h2c floors at ln 2; cycle/smooth/fusion vanish on canonical minimizers", why);
}

// ---- criteria 7 + 9: end-to-end recovery and the ablation grid ----
struct RunOutcome {
    double base_epe = 0.0;
    double final_epe = 0.0;
    bool dsc_up = false;
    double seconds = 0.0;
};

RunOutcome run_recovery(int seed, Ablation ablation) {
    ScenePair pair = gen_scene(1000 + static_cast<uint64_t>(seed), 128, 128, 5);
    Grid field = random_nonlinear_warp(2000 + static_cast<uint64_t>(seed), 128, 128, 6.0);
    ScenePair mis = misalign(pair, field, Modality::thermal);
    AlignConfig cfg;
    cfg.seed = static_cast<uint64_t>(seed);
    cfg.ablation = ablation;
    auto t0 = Clock::now();
    AlignResult res = register_pair(mis.V, mis.T, cfg);
    RunOutcome out;
    out.seconds = seconds_since(t0);
    out.base_epe = median_of(landmark_errors(mis, Grid::zeros({128, 128, 2})));
    out.final_epe = median_of(landmark_errors(mis, res.field_t2v));
    double dsc_before = dice(binarize_edges(mis.T), binarize_edges(pair.T));
    double dsc_after = dice(binarize_edges(res.T_v), binarize_edges(pair.T));
    out.dsc_up = dsc_after > dsc_before;
    return out;
}

// run fn(i) for i in [0, n) on two workers, outcomes collected in order
template <class Fn>
std::vector<RunOutcome> parallel_runs(int n, Fn fn) {
    std::vector<RunOutcome> out(static_cast<size_t>(n));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
            out[static_cast<size_t>(i)] = fn(i);
    };
    std::thread a(worker), b(worker);
    a.join();
    b.join();
    return out;
}

double median_epe_of(const std::vector<RunOutcome>& runs) {
    std::vector<double> v;
    for (const RunOutcome& r : runs) v.push_back(r.final_epe);
    return median_of(v);
}

void criterion_recovery_and_ablations() {
    const int kSeeds = 10;
    std::vector<RunOutcome> full =
        parallel_runs(kSeeds, [](int i) { return run_recovery(i, Ablation::none); });

    int good = 0;
    double max_secs = 0.0;
    for (int i = 0; i < kSeeds; ++i) {
        const RunOutcome& r = full[static_cast<size_t>(i)];
        bool reduced = r.final_epe <= 0.4 * r.base_epe; // >= 60% reduction
        if (reduced && r.dsc_up) ++good;
        max_secs = std::max(max_secs, r.seconds);
        std::printf("      seed %d: EPE %.3f -> %.3f (%.1f%% reduction), DSC %s, %.1f s\n", i,
                    r.base_epe, r.final_epe, 100.0 * (1.0 - r.final_epe / r.base_epe),
                    r.dsc_up ? "up" : "DOWN", r.seconds);
    }
    bool ok7 = good >= 9 && max_secs < 120.0;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d/10 seeds pass, max %.0f s/pair", good, max_secs);
    report(7, ok7, "synthetic recovery: >= 60% median EPE reduction + DSC increase on >= 9/10",
           buf);

    // ablation grid: all four variants over the same 10 seeds
    struct VariantResult {
        Ablation ab;
        std::vector<RunOutcome> runs;
    };
    std::vector<VariantResult> variants;
    for (Ablation ab : {Ablation::euclidean_h2c, Ablation::disable_cycle,
                        Ablation::h2c_pixel_only, Ablation::h2c_edge_only}) {
        variants.push_back({ab, parallel_runs(kSeeds, [ab](int i) { return run_recovery(i, ab); })});
    }
    bool all_ran = true;
    for (const VariantResult& v : variants) {
        double med = median_epe_of(v.runs);
        std::printf("      %s: median EPE %.3f over %d seeds\n", ablation_tag(v.ab), med, kSeeds);
        for (const RunOutcome& r : v.runs)
            if (!std::isfinite(r.final_epe)) all_ran = false;
    }
    double med_full = median_epe_of(full);
    double med_eu = median_epe_of(variants[0].runs);
    bool ordering = med_full <= med_eu;
    std::printf("      full model median EPE %.3f vs Euclidean (Exp-I) %.3f -> %s\n", med_full,
                med_eu,
                ordering ? "hyperbolic <= Euclidean"
                         : "FLAGGED: Euclidean ahead (reported, not a failure)");
    std::snprintf(buf, sizeof(buf), "4 variants x %d seeds, ordering %s", kSeeds,
                  ordering ? "holds" : "flagged");
    report(9, all_ran, "ablation grid runs to completion with comparable reports", buf);
}

// ---- criterion 8: null misalignment ----
void criterion_null() {
    bool ok = true;
    double worst = 0.0;
    for (int seed = 0; seed < 3; ++seed) {
        ScenePair pair = gen_scene(500 + static_cast<uint64_t>(seed), 128, 128, 5);
        AlignConfig cfg;
        cfg.seed = static_cast<uint64_t>(seed);
        AlignResult res = register_pair(pair.V, pair.T, cfg);
        double d1 = mean_displacement(res.field_t2v);
        double d2 = mean_displacement(res.field_v2t);
        worst = std::max({worst, d1, d2});
        if (d1 >= 0.5 || d2 >= 0.5) ok = false;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst mean |disp| = %.3f px", worst);
    report(8, ok, "aligned pairs keep mean displacement below 0.5 px", buf);
}

// ---- criterion 10: metrics unit suite ----
void criterion_metrics() {
    auto t0 = Clock::now();
    bool ok = true;
    std::string why = "ok";
    EdgeSet a{{{1, 2}, {5, 5}}};
    if (dice(a, a) != 1.0) { ok = false; why = "dice"; }
    SurfaceDistances s = surface_distances(EdgeSet{{{0, 0}}}, EdgeSet{{{3, 4}}});
    if (s.hd != 5.0 || s.hd95 != 5.0 || s.assd != 5.0) { ok = false; why = "3-4-5"; }
    if (entropy(Grid::full({16, 16}, 0.3)) != 0.0) { ok = false; why = "entropy const"; }
    Grid uni = Grid::zeros({64, 64});
    for (int64_t i = 0; i < 64 * 64; ++i)
        uni.data[static_cast<size_t>(i)] = static_cast<double>(i % 256) / 255.0;
    if (entropy(uni) != 8.0) { ok = false; why = "entropy uniform"; }
    if (spatial_frequency(Grid::full({8, 8}, 0.5)) != 0.0) { ok = false; why = "sf const"; }
    Grid img = Grid::zeros({12, 12});
    img.at(4, 4) = 0.7;
    if (mee(img, img) != 0.0) { ok = false; why = "mee identical"; }

    Rng rng(1010);
    for (int trial = 0; trial < 5 && ok; ++trial) {
        EdgeSet A, B;
        for (int i = 0; i < 200; ++i) {
            A.points.emplace_back(rng.below(64), rng.below(64));
            B.points.emplace_back(rng.below(64), rng.below(64));
        }
        SurfaceDistances fast = surface_distances(A, B);
        // exhaustive oracle
        auto directed = [](const EdgeSet& P, const EdgeSet& Q) {
            std::vector<double> out;
            for (auto [pr, pc] : P.points) {
                double best = std::numeric_limits<double>::infinity();
                for (auto [qr, qc] : Q.points) {
                    double dr = static_cast<double>(pr - qr), dc = static_cast<double>(pc - qc);
                    best = std::min(best, dr * dr + dc * dc);
                }
                out.push_back(std::sqrt(best));
            }
            return out;
        };
        std::vector<double> dab = directed(A, B), dba = directed(B, A);
        double hd = std::max(*std::max_element(dab.begin(), dab.end()),
                             *std::max_element(dba.begin(), dba.end()));
        if (fast.hd != hd) { ok = false; why = "oracle hd"; }
        double sum = 0.0;
        for (double v : dab) sum += v;
        for (double v : dba) sum += v;
        if (std::fabs(fast.assd - sum / static_cast<double>(dab.size() + dba.size())) > 1e-12) {
            ok = false;
            why = "oracle assd";
        }
    }
    double secs = seconds_since(t0);
    if (secs >= 1.0) { ok = false; why = "too slow"; }
    report(10, ok, "metrics unit suite incl. exhaustive oracle up to 200 points",
           why + ", " + std::to_string(secs).substr(0, 5) + " s");
}

// ---- criterion 11: CLI determinism ----
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism(const std::string& cli) {
    if (cli.empty()) {
        report(11, false, "CLI determinism", "no CLI path given");
        return;
    }
    bool ok = true;
    std::string why = "ok";
    fs::path base = fs::temp_directory_path() / "hyalign_acc_det";
    fs::remove_all(base);
    fs::create_directories(base);

    auto run = [&](const std::string& args) {
        std::string cmd = cli + " " + args + " >/dev/null 2>/dev/null";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    auto same_tree = [&](const fs::path& a, const fs::path& b) {
        for (const auto& entry : fs::directory_iterator(a)) {
            fs::path other = b / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) return false;
        }
        return true;
    };

    fs::path s1 = base / "s1", s2 = base / "s2";
    std::string synth_flags = "synth --seed 12 --height 72 --width 72 --magnitude 4 ";
    if (run(synth_flags + "--out-dir " + s1.string()) != 0 ||
        run(synth_flags + "--out-dir " + s2.string()) != 0 || !same_tree(s1, s2)) {
        ok = false;
        why = "synth";
    }

    fs::path a1 = base / "a1", a2 = base / "a2";
    std::string align_flags = "align --visible " + (s1 / "V.pgm").string() + " --thermal " +
                              (s1 / "T_misaligned.pgm").string() + " --seed 1 --iterations 10 ";
    if (run(align_flags + "--out-dir " + a1.string()) != 0 ||
        run(align_flags + "--out-dir " + a2.string()) != 0 || !same_tree(a1, a2)) {
        ok = false;
        why = "align";
    }

    fs::path e1 = base / "e1", e2 = base / "e2";
    std::string eval_flags = "eval --result " + (a1 / "F.pgm").string() + " --reference " +
                             (s1 / "V.pgm").string() + " ";
    if (run(eval_flags + "--out-dir " + e1.string()) != 0 ||
        run(eval_flags + "--out-dir " + e2.string()) != 0 || !same_tree(e1, e2)) {
        ok = false;
        why = "eval";
    }

    fs::path t1 = base / "t1", t2 = base / "t2";
    if (run("theorem --out-dir " + t1.string()) != 0 ||
        run("theorem --out-dir " + t2.string()) != 0 || !same_tree(t1, t2)) {
        ok = false;
        why = "theorem";
    }
    report(11, ok, "every CLI command re-run with the same seed is byte-identical", why);
}

} // namespace

int main(int argc, char** argv) {
    std::string cli = argc > 1 ? argv[1] : "";
    auto t0 = Clock::now();

    criterion_geometry();
    criterion_distance_forms();
    criterion_theorem(cli);
    criterion_taylor();
    criterion_autodiff();
    criterion_loss_floors();
    criterion_recovery_and_ablations(); // prints 7 then 9
    criterion_null();
    criterion_metrics();
    criterion_determinism(cli);

    std::printf("%s: %d criterion(s) failed, total %.0f s\n",
                g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", g_failures,
                seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
