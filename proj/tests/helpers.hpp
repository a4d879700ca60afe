#pragma once

#include <cmath>
#include <functional>

#include "hyalign/autodiff.hpp"
#include "hyalign/grid.hpp"
#include "hyalign/numdiff.hpp"
#include "hyalign/rng.hpp"

namespace testutil {

using namespace hyalign;

inline Grid random_grid(Rng& rng, std::vector<int64_t> shape, double lo = 0.0, double hi = 1.0) {
    Grid g = Grid::zeros(std::move(shape));
    for (double& v : g.data) v = rng.uniform(lo, hi);
    return g;
}

// max |a - b| over elements
inline double max_abs_diff(const Grid& a, const Grid& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

inline bool bitwise_equal(const Grid& a, const Grid& b) {
    return a.shape == b.shape && a.data == b.data;
}

// Reverse-mode gradient of build(x) against central finite differences of the
// same forward evaluation; returns ||ad - fd||_inf / (||fd||_inf + floor).
template <class Build>
double gradient_check(const Grid& x0, Build build, double h = 1e-6) {
    Tape t;
    Var x = t.leaf(x0, true);
    Var y = build(t, x);
    t.backward(y);
    Grid ad = t.grad(x);

    auto f = [&](const Grid& g) {
        Tape tt;
        Var xx = tt.leaf(g, false);
        return tt.value(build(tt, xx)).data[0];
    };
    Grid fd = finite_diff_gradient(f, x0, h);

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < fd.data.size(); ++i) {
        num = std::max(num, std::fabs(ad.data[i] - fd.data[i]));
        den = std::max(den, std::fabs(fd.data[i]));
    }
    return num / (den + 1e-10);
}

} // namespace testutil
