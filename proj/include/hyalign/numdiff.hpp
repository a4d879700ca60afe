#pragma once

#include <cmath>
#include <functional>

#include "hyalign/grid.hpp"

namespace hyalign {

// Central-difference gradient estimate, one probe pair per coordinate.
// Independent of the tape; used as the reference for gradient checks and by
// the sensitivity sweep.
inline Grid finite_diff_gradient(const std::function<double(const Grid&)>& f, const Grid& x,
                                 double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h <= 0");
    require_finite(x, "finite_diff_gradient input");
    Grid g = Grid::zeros(x.shape);
    Grid probe = x;
    for (int64_t i = 0; i < x.numel(); ++i) {
        size_t k = static_cast<size_t>(i);
        double orig = probe.data[k];
        probe.data[k] = orig + h;
        double fp = f(probe);
        probe.data[k] = orig - h;
        double fm = f(probe);
        probe.data[k] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_gradient: non-finite function value at probe");
        g.data[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace hyalign
