#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hyalign/autodiff.hpp"
#include "hyalign/grid.hpp"
#include "hyalign/numdiff.hpp"

namespace hyalign {

struct Curvature {
    double c = 0.01;
    Curvature() = default;
    explicit Curvature(double cv) : c(cv) {
        if (!(c > 0.0)) throw std::invalid_argument("Curvature: c must be > 0");
    }
    double radius() const { return 1.0 / std::sqrt(c); }
};

struct Epsilon {
    double value = 1e-6;
    Epsilon() = default;
    explicit Epsilon(double e) : value(e) {
        if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("Epsilon: must be in (0, 1)");
    }
};

// Point strictly inside the ball of radius 1/sqrt(c); construction clamps to
// norm (1 - eps)/sqrt(c) so the invariant cannot be violated by rounding.
struct BallPoint {
    std::vector<double> coords;
    Curvature curv{};
};

namespace detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// numerically stable acosh(1 + x) for x >= 0
inline double acosh1p(double x) {
    return std::log1p(x + std::sqrt(x * (x + 2.0)));
}

} // namespace detail

inline std::vector<double> clamp_to_ball(std::vector<double> x, Curvature k, Epsilon eps = {}) {
    double r = std::sqrt(detail::norm2(x));
    double cap = (1.0 - eps.value) * k.radius();
    if (r > cap) {
        double s = cap / r;
        for (double& v : x) v *= s;
    }
    return x;
}

inline BallPoint ball_point(std::vector<double> coords, Curvature k, Epsilon eps = {}) {
    return BallPoint{clamp_to_ball(std::move(coords), k, eps), k};
}

inline double euclid_dist(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("euclid_dist: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// tanh-scaled projection of a flat vector into the ball, clamped; the zero
// vector maps to the origin (removable singularity).
inline BallPoint to_ball(const std::vector<double>& i, Curvature k, Epsilon eps = {}) {
    for (double x : i)
        if (!std::isfinite(x)) throw NumericError("to_ball: non-finite input");
    double r = std::sqrt(detail::norm2(i));
    if (r == 0.0) return BallPoint{std::vector<double>(i.size(), 0.0), k};
    double t = std::sqrt(k.c) * r;
    double s = std::tanh(t) / t;
    std::vector<double> out(i.size());
    for (size_t j = 0; j < i.size(); ++j) out[j] = i[j] * s;
    return ball_point(std::move(out), k, eps);
}

inline BallPoint mobius_add(const BallPoint& m, const BallPoint& n, Epsilon eps = {}) {
    if (m.coords.size() != n.coords.size())
        throw std::invalid_argument("mobius_add: dimension mismatch");
    if (m.curv.c != n.curv.c) throw std::invalid_argument("mobius_add: curvature mismatch");
    const double c = m.curv.c;
    double mn = detail::dot(m.coords, n.coords);
    double mm = detail::norm2(m.coords);
    double nn = detail::norm2(n.coords);
    double ca = 1.0 + 2.0 * c * mn + c * nn;
    double cb = 1.0 - c * mm;
    double den = 1.0 + 2.0 * c * mn + c * c * mm * nn;
    std::vector<double> out(m.coords.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = (ca * m.coords[i] + cb * n.coords[i]) / den;
    return ball_point(std::move(out), m.curv, eps);
}

// Geodesic distance (2/sqrt(c)) artanh(sqrt(c) ||(-m) (+) n||). The gyronorm
// is evaluated through its symmetric closed form
//   ||(-m) (+) n||^2 = ||m - n||^2 / (1 - 2c<m,n> + c^2 ||m||^2 ||n||^2),
// which makes dist(m, n) bitwise symmetric and exactly zero for equal inputs.
inline double dist(const BallPoint& m, const BallPoint& n) {
    if (m.coords.size() != n.coords.size()) throw std::invalid_argument("dist: dimension mismatch");
    if (m.curv.c != n.curv.c) throw std::invalid_argument("dist: curvature mismatch");
    const double c = m.curv.c;
    double num = euclid_dist(m.coords, n.coords);
    double den = 1.0 - 2.0 * c * detail::dot(m.coords, n.coords) +
                 c * c * detail::norm2(m.coords) * detail::norm2(n.coords);
    double arg = std::sqrt(c) * num / std::sqrt(den);
    if (!(arg < 1.0)) throw NumericError("dist: artanh argument >= 1 (point outside ball?)");
    return 2.0 / std::sqrt(c) * std::atanh(arg);
}

// Unit-ball distance in the arcosh form; the c = 1 cross-check for dist().
inline double dist_arcosh_c1(const BallPoint& u, const BallPoint& v) {
    if (u.curv.c != 1.0 || v.curv.c != 1.0)
        throw std::invalid_argument("dist_arcosh_c1: requires curvature 1");
    if (u.coords.size() != v.coords.size())
        throw std::invalid_argument("dist_arcosh_c1: dimension mismatch");
    double uu = detail::norm2(u.coords);
    double vv = detail::norm2(v.coords);
    double d2 = 0.0;
    for (size_t i = 0; i < u.coords.size(); ++i) {
        double d = u.coords[i] - v.coords[i];
        d2 += d * d;
    }
    double x = 2.0 * d2 / ((1.0 - uu) * (1.0 - vv));
    return detail::acosh1p(x);
}

// First Taylor term of the unit-ball distance for nearby points.
inline double taylor_dist(const BallPoint& u, const BallPoint& v) {
    if (u.curv.c != 1.0 || v.curv.c != 1.0)
        throw std::invalid_argument("taylor_dist: requires curvature 1");
    double uu = detail::norm2(u.coords);
    return 2.0 * euclid_dist(u.coords, v.coords) / (1.0 - uu);
}

// Analytic hyperbolic-to-Euclidean gradient-magnitude ratio 2/(1 - ||u||^2).
inline double grad_ratio(const BallPoint& u) {
    if (u.curv.c != 1.0) throw std::invalid_argument("grad_ratio: requires curvature 1");
    double uu = detail::norm2(u.coords);
    if (!(uu < 1.0)) throw std::invalid_argument("grad_ratio: ||u|| >= 1");
    return 2.0 / (1.0 - uu);
}

struct GradRatioMeasurement {
    double analytic = 0.0;
    double measured = 0.0;
};

// Measures ||grad_u d_P|| / ||grad_u d_E|| by central differences at
// v = u + delta and reports it next to the analytic ratio.
inline GradRatioMeasurement measure_grad_ratio(const std::vector<double>& u, double delta = 1e-5,
                                               double fd_step = 1e-8) {
    Curvature one(1.0);
    BallPoint up{u, one};
    GradRatioMeasurement out;
    out.analytic = grad_ratio(up);

    std::vector<double> v = u;
    double spread = delta / std::sqrt(static_cast<double>(u.size()));
    for (double& x : v) x += spread;

    Grid ug = Grid::from({static_cast<int64_t>(u.size())}, u);
    auto dp = [&](const Grid& g) {
        BallPoint a{g.data, one};
        BallPoint b{v, one};
        return dist_arcosh_c1(a, b);
    };
    auto de = [&](const Grid& g) { return euclid_dist(g.data, v); };
    Grid gp = finite_diff_gradient(dp, ug, fd_step);
    Grid ge = finite_diff_gradient(de, ug, fd_step);
    double np = 0.0, ne = 0.0;
    for (double x : gp.data) np += x * x;
    for (double x : ge.data) ne += x * x;
    out.measured = std::sqrt(np) / std::sqrt(ne);
    return out;
}

struct TheoremRow {
    double norm = 0.0;
    double analytic_ratio = 0.0;
    double measured_ratio = 0.0;
    double taylor_rel_err = 0.0;
};

// Sensitivity sweep over ||u||: analytic vs measured gradient ratio plus the
// relative error of the Taylor form at v = u + delta.
inline std::vector<TheoremRow> theorem_sweep(const std::vector<double>& norms,
                                             double delta = 1e-5) {
    Curvature one(1.0);
    std::vector<TheoremRow> rows;
    rows.reserve(norms.size());
    for (double r : norms) {
        std::vector<double> u = {r, 0.0};
        GradRatioMeasurement m = measure_grad_ratio(u, delta);
        double spread = delta / std::sqrt(2.0);
        BallPoint up{u, one};
        BallPoint vp{{r + spread, spread}, one};
        double exact = dist_arcosh_c1(up, vp);
        double tay = taylor_dist(up, vp);
        TheoremRow row;
        row.norm = r;
        row.analytic_ratio = m.analytic;
        row.measured_ratio = m.measured;
        row.taylor_rel_err = exact > 0.0 ? std::fabs(tay - exact) / exact : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<double> default_theorem_norms() {
    std::vector<double> norms;
    for (int i = 0; i < 20; ++i) norms.push_back(0.05 * i);        // 0.00 .. 0.95
    for (int i = 0; i < 4; ++i) norms.push_back(0.96 + 0.01 * i);  // 0.96 .. 0.99
    norms.push_back(0.999);
    return norms;
}

// ---- differentiable counterparts on the tape ----

inline Var euclid_dist(Var u, Var v) { return u.tape->vec_norm(u.tape->sub(u, v)); }

// to_ball as one fused node: y = x tanh(sqrt(c) r)/(sqrt(c) r), clamped to
// norm (1-eps)/sqrt(c); analytic jacobian in the backward closure covers the
// origin (identity) and the clamped branch (radial projection).
inline Var ball_embed(Var x, Curvature k, Epsilon eps = {}) {
    Tape& t = *x.tape;
    const Grid& vx = t.value(x);
    const double c = k.c;
    const double sc = std::sqrt(c);
    const double cap = (1.0 - eps.value) / sc;

    double r2 = 0.0;
    for (double v : vx.data) r2 += v * v;
    double r = std::sqrt(r2);

    Grid out = vx;
    bool clamped = false;
    if (r > 0.0) {
        double tt = sc * r;
        double s = std::tanh(tt) / tt;
        double outnorm = std::tanh(tt) / sc;
        if (outnorm > cap) {
            clamped = true;
            s = cap / r;
        }
        for (double& v : out.data) v *= s;
    } else {
        out.fill(0.0);
    }

    int32_t xi = x.idx;
    int32_t self = static_cast<int32_t>(t.size());
    return t.make_node(
        std::move(out), t.requires_grad(x),
        [xi, self, r, c, sc, cap, clamped](Tape& tp) {
            const Grid& g = tp.grad(Var{&tp, self});
            const Grid& vx = tp.value(Var{&tp, xi});
            Grid& gx = tp.grad_mut(Var{&tp, xi});
            if (r == 0.0) {
                // jacobian -> identity at the origin
                for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
                return;
            }
            double xg = 0.0;
            for (size_t i = 0; i < vx.data.size(); ++i) xg += vx.data[i] * g.data[i];
            if (clamped) {
                // y = cap * x / r:  J = cap/r (I - x x^T / r^2)
                double a = cap / r;
                double b = cap / (r * r * r);
                for (size_t i = 0; i < gx.data.size(); ++i)
                    gx.data[i] += a * g.data[i] - b * xg * vx.data[i];
            } else {
                double tt = sc * r;
                double th = std::tanh(tt);
                double s = th / tt;
                double sech2 = 1.0 - th * th;
                double ds_dr = sc * (tt * sech2 - th) / (tt * tt);
                for (size_t i = 0; i < gx.data.size(); ++i)
                    gx.data[i] += s * g.data[i] + (ds_dr / r) * xg * vx.data[i];
            }
        },
        "ball_embed");
}

// Radial clamp into the ball; identity inside, rescale on/over the cap.
inline Var ball_clamp(Var x, Curvature k, Epsilon eps = {}) {
    Tape& t = *x.tape;
    const Grid& vx = t.value(x);
    const double cap = (1.0 - eps.value) * k.radius();
    double r2 = 0.0;
    for (double v : vx.data) r2 += v * v;
    double r = std::sqrt(r2);
    if (r <= cap) return x;
    Grid out = vx;
    double s = cap / r;
    for (double& v : out.data) v *= s;
    int32_t xi = x.idx;
    int32_t self = static_cast<int32_t>(t.size());
    return t.make_node(std::move(out), t.requires_grad(x),
                       [xi, self, r, cap](Tape& tp) {
                           const Grid& g = tp.grad(Var{&tp, self});
                           const Grid& vx = tp.value(Var{&tp, xi});
                           Grid& gx = tp.grad_mut(Var{&tp, xi});
                           double xg = 0.0;
                           for (size_t i = 0; i < vx.data.size(); ++i)
                               xg += vx.data[i] * g.data[i];
                           double a = cap / r;
                           double b = cap / (r * r * r);
                           for (size_t i = 0; i < gx.data.size(); ++i)
                               gx.data[i] += a * g.data[i] - b * xg * vx.data[i];
                       },
                       "ball_clamp");
}

inline Var mobius_add(Var m, Var n, Curvature k, Epsilon eps = {}) {
    Tape& t = *m.tape;
    const double c = k.c;
    Var mn = t.dot(m, n);
    Var mm = t.dot(m, m);
    Var nn = t.dot(n, n);
    Var ca = 2.0 * c * mn + c * nn + 1.0;
    Var cb = 1.0 - c * mm;
    Var den = 2.0 * c * mn + (c * c) * (mm * nn) + 1.0;
    Var out = (ca * m + cb * n) / den;
    return ball_clamp(out, k, eps);
}

// Differentiable geodesic distance through the symmetric gyronorm form.
inline Var poincare_dist(Var m, Var n, Curvature k) {
    Tape& t = *m.tape;
    const double c = k.c;
    Var num = t.vec_norm(m - n);
    Var den = (-2.0 * c) * t.dot(m, n) + (c * c) * (t.dot(m, m) * t.dot(n, n)) + 1.0;
    Var arg = std::sqrt(c) * (num / t.sqrt(den));
    return (2.0 / std::sqrt(c)) * t.atanh(arg);
}

} // namespace hyalign
