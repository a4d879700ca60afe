#pragma once

#include <cmath>
#include <cstdint>

#include "hyalign/grid.hpp"

namespace hyalign {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

struct AdamWState {
    Grid m, v;
    int64_t t = 0;
    AdamWConfig cfg;

    static AdamWState for_param(const Grid& p, AdamWConfig c = {}) {
        AdamWState s;
        s.m = Grid::zeros(p.shape);
        s.v = Grid::zeros(p.shape);
        s.cfg = c;
        return s;
    }
};

// One AdamW update with decoupled weight decay; zeroes the gradient.
inline void adamw_step(Grid& param, Grid& grad, AdamWState& st) {
    require_same_shape(param, grad, "adamw_step");
    require_same_shape(param, st.m, "adamw_step state");
    require_finite(grad, "adamw_step gradient");
    st.t += 1;
    const AdamWConfig& c = st.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
    for (size_t i = 0; i < param.data.size(); ++i) {
        double g = grad.data[i];
        st.m.data[i] = c.beta1 * st.m.data[i] + (1.0 - c.beta1) * g;
        st.v.data[i] = c.beta2 * st.v.data[i] + (1.0 - c.beta2) * g * g;
        double mhat = st.m.data[i] / bc1;
        double vhat = st.v.data[i] / bc2;
        param.data[i] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * param.data[i]);
        grad.data[i] = 0.0;
    }
}

} // namespace hyalign
