#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hyalign/errors.hpp"

namespace hyalign {

// Dense row-major grid of doubles. Rank is 1 (vectors), 2 (images) or
// 3 (displacement fields, H x W x 2).
struct Grid {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Grid() = default;

    static Grid zeros(std::vector<int64_t> s) {
        Grid g;
        g.shape = std::move(s);
        g.data.assign(static_cast<size_t>(numel_of(g.shape)), 0.0);
        return g;
    }

    static Grid full(std::vector<int64_t> s, double v) {
        Grid g = zeros(std::move(s));
        for (double& x : g.data) x = v;
        return g;
    }

    static Grid scalar(double v) { return full({1}, v); }

    static Grid from(std::vector<int64_t> s, std::vector<double> values) {
        Grid g;
        g.shape = std::move(s);
        g.data = std::move(values);
        if (static_cast<int64_t>(g.data.size()) != numel_of(g.shape))
            throw std::invalid_argument("Grid::from: data length does not match shape");
        return g;
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        if (s.empty()) throw std::invalid_argument("Grid: empty shape");
        int64_t n = 1;
        for (int64_t e : s) {
            if (e <= 0) throw std::invalid_argument("Grid: non-positive extent");
            n *= e;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const { return shape.at(0); }
    int64_t cols() const { return shape.at(1); }

    bool same_shape(const Grid& o) const { return shape == o.shape; }

    // 2-D access
    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

    // 3-D access (fields: row, col, channel)
    double& at(int64_t r, int64_t c, int64_t k) {
        return data[static_cast<size_t>((r * shape[1] + c) * shape[2] + k)];
    }
    double at(int64_t r, int64_t c, int64_t k) const {
        return data[static_cast<size_t>((r * shape[1] + c) * shape[2] + k)];
    }

    void fill(double v) {
        for (double& x : data) x = v;
    }

    bool all_finite() const {
        for (double x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline void require_finite(const Grid& g, const char* what) {
    if (!g.all_finite())
        throw NumericError(std::string("non-finite value in ") + what);
}

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline Grid clamp01(Grid img) {
    for (double& x : img.data) x = clamp01(x);
    return img;
}

} // namespace hyalign
