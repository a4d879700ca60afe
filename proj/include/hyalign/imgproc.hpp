#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "hyalign/autodiff.hpp"
#include "hyalign/grid.hpp"

namespace hyalign {

// Displacement fields are H x W x 2 grids storing (dx, dy) in pixels with
// x = column index; warping samples the source at p + field(p) (backward
// warping). Sobel and warp both use replicate padding at the borders.

namespace detail {

inline int64_t clamp_idx(int64_t i, int64_t n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

struct Bilinear {
    int64_t x0, x1, y0, y1;
    double wx, wy;
};

inline Bilinear bilinear_at(double sx, double sy, int64_t H, int64_t W) {
    double fx = std::floor(sx), fy = std::floor(sy);
    Bilinear b;
    b.wx = sx - fx;
    b.wy = sy - fy;
    int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
    b.x0 = clamp_idx(ix, W);
    b.x1 = clamp_idx(ix + 1, W);
    b.y0 = clamp_idx(iy, H);
    b.y1 = clamp_idx(iy + 1, H);
    return b;
}

inline double bilinear_value(const Grid& img, const Bilinear& b) {
    double top = (1.0 - b.wx) * img.at(b.y0, b.x0) + b.wx * img.at(b.y0, b.x1);
    double bot = (1.0 - b.wx) * img.at(b.y1, b.x0) + b.wx * img.at(b.y1, b.x1);
    return (1.0 - b.wy) * top + b.wy * bot;
}

// 3x3 Sobel correlation with replicate padding. Values enter relative to the
// center pixel: the kernels sum to zero, so constant images produce exact
// zeros (and the backward pass is unchanged, the center weight stays zero).
inline void sobel_xy(const Grid& img, Grid& gx, Grid& gy) {
    static const double KX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const double KY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    const int64_t H = img.rows(), W = img.cols();
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            const double center = img.at(y, x);
            double sx = 0.0, sy = 0.0;
            for (int64_t dy = -1; dy <= 1; ++dy) {
                int64_t yy = clamp_idx(y + dy, H);
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    double v = img.at(yy, clamp_idx(x + dx, W)) - center;
                    sx += KX[dy + 1][dx + 1] * v;
                    sy += KY[dy + 1][dx + 1] * v;
                }
            }
            gx.at(y, x) = sx;
            gy.at(y, x) = sy;
        }
    }
}

inline void check_image(const Grid& img, const char* what) {
    if (img.shape.size() != 2) throw std::invalid_argument(std::string(what) + ": rank != 2");
}

inline void check_field(const Grid& field, const char* what) {
    if (field.shape.size() != 3 || field.shape[2] != 2)
        throw std::invalid_argument(std::string(what) + ": field is not H x W x 2");
}

} // namespace detail

// ---- plain kernels ----

inline Grid sobel_mag(const Grid& img) {
    detail::check_image(img, "sobel");
    if (img.rows() < 3 || img.cols() < 3)
        throw std::invalid_argument("sobel: image smaller than kernel");
    Grid gx = Grid::zeros(img.shape), gy = Grid::zeros(img.shape);
    detail::sobel_xy(img, gx, gy);
    Grid out = Grid::zeros(img.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::hypot(gx.data[i], gy.data[i]);
    return out;
}

inline Grid warp(const Grid& img, const Grid& field) {
    detail::check_image(img, "warp");
    detail::check_field(field, "warp");
    if (field.shape[0] != img.rows() || field.shape[1] != img.cols())
        throw std::invalid_argument("warp: shape mismatch");
    const int64_t H = img.rows(), W = img.cols();
    Grid out = Grid::zeros(img.shape);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            double sx = static_cast<double>(x) + field.at(y, x, 0);
            double sy = static_cast<double>(y) + field.at(y, x, 1);
            out.at(y, x) = detail::bilinear_value(img, detail::bilinear_at(sx, sy, H, W));
        }
    return out;
}

// Bilinear upsampling of a control grid to a dense field; control values are
// reproduced exactly at control-point pixel locations.
inline Grid upsample_field(const Grid& cgrid, int64_t H, int64_t W) {
    detail::check_field(cgrid, "upsample_field");
    const int64_t Gh = cgrid.shape[0], Gw = cgrid.shape[1];
    if (Gh < 2 || Gw < 2) throw std::invalid_argument("upsample_field: control grid below 2x2");
    if (H < 1 || W < 1) throw std::invalid_argument("upsample_field: bad output size");
    Grid out = Grid::zeros({H, W, 2});
    for (int64_t y = 0; y < H; ++y) {
        double u = H == 1 ? 0.0
                          : static_cast<double>(y) * static_cast<double>(Gh - 1) /
                                static_cast<double>(H - 1);
        int64_t r0 = std::min<int64_t>(static_cast<int64_t>(u), Gh - 2);
        double wu = u - static_cast<double>(r0);
        for (int64_t x = 0; x < W; ++x) {
            double v = W == 1 ? 0.0
                              : static_cast<double>(x) * static_cast<double>(Gw - 1) /
                                    static_cast<double>(W - 1);
            int64_t c0 = std::min<int64_t>(static_cast<int64_t>(v), Gw - 2);
            double wv = v - static_cast<double>(c0);
            for (int64_t k = 0; k < 2; ++k) {
                double top = (1.0 - wv) * cgrid.at(r0, c0, k) + wv * cgrid.at(r0, c0 + 1, k);
                double bot = (1.0 - wv) * cgrid.at(r0 + 1, c0, k) + wv * cgrid.at(r0 + 1, c0 + 1, k);
                out.at(y, x, k) = (1.0 - wu) * top + wu * bot;
            }
        }
    }
    return out;
}

// k x k mean pooling; boundary cells shrink instead of padding.
inline Grid avgpool(const Grid& img, int64_t k) {
    detail::check_image(img, "avgpool");
    if (k < 1) throw std::invalid_argument("avgpool: k < 1");
    const int64_t H = img.rows(), W = img.cols();
    const int64_t Ho = (H + k - 1) / k, Wo = (W + k - 1) / k;
    Grid out = Grid::zeros({Ho, Wo});
    for (int64_t by = 0; by < Ho; ++by)
        for (int64_t bx = 0; bx < Wo; ++bx) {
            int64_t y1 = std::min(H, (by + 1) * k), x1 = std::min(W, (bx + 1) * k);
            double s = 0.0;
            for (int64_t y = by * k; y < y1; ++y)
                for (int64_t x = bx * k; x < x1; ++x) s += img.at(y, x);
            out.at(by, bx) = s / static_cast<double>((y1 - by * k) * (x1 - bx * k));
        }
    return out;
}

// sum of squared forward differences over both channels and both axes
inline double field_sq_grad_sum(const Grid& field) {
    detail::check_field(field, "field_spatial_grad");
    const int64_t H = field.shape[0], W = field.shape[1];
    if (H < 2 || W < 2) throw std::invalid_argument("field_spatial_grad: field below 2x2");
    double s = 0.0;
    for (int64_t k = 0; k < 2; ++k) {
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x + 1 < W; ++x) {
                double d = field.at(y, x + 1, k) - field.at(y, x, k);
                s += d * d;
            }
        for (int64_t y = 0; y + 1 < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double d = field.at(y + 1, x, k) - field.at(y, x, k);
                s += d * d;
            }
    }
    return s;
}

// Composition of two backward-warp fields: warp(warp(I, first), second) ==
// warp(I, compose_fields(first, second)) up to interpolation error.
inline Grid compose_fields(const Grid& first, const Grid& second) {
    detail::check_field(first, "compose_fields");
    detail::check_field(second, "compose_fields");
    require_same_shape(first, second, "compose_fields");
    const int64_t H = first.shape[0], W = first.shape[1];
    Grid out = Grid::zeros(first.shape);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            double sx = static_cast<double>(x) + second.at(y, x, 0);
            double sy = static_cast<double>(y) + second.at(y, x, 1);
            detail::Bilinear b = detail::bilinear_at(sx, sy, H, W);
            for (int64_t k = 0; k < 2; ++k) {
                double top = (1.0 - b.wx) * first.at(b.y0, b.x0, k) + b.wx * first.at(b.y0, b.x1, k);
                double bot = (1.0 - b.wx) * first.at(b.y1, b.x0, k) + b.wx * first.at(b.y1, b.x1, k);
                out.at(y, x, k) = second.at(y, x, k) + (1.0 - b.wy) * top + b.wy * bot;
            }
        }
    return out;
}

// mean displacement magnitude of a field, in pixels
inline double mean_displacement(const Grid& field) {
    detail::check_field(field, "mean_displacement");
    const int64_t H = field.shape[0], W = field.shape[1];
    double s = 0.0;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) s += std::hypot(field.at(y, x, 0), field.at(y, x, 1));
    return s / static_cast<double>(H * W);
}

inline Grid max_image(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "max_image");
    Grid out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::max(a.data[i], b.data[i]);
    return out;
}

// ---- tape versions ----

inline Var sobel_mag(Var img) {
    Tape& t = *img.tape;
    const Grid& vi = t.value(img);
    detail::check_image(vi, "sobel");
    if (vi.rows() < 3 || vi.cols() < 3)
        throw std::invalid_argument("sobel: image smaller than kernel");
    Grid gx = Grid::zeros(vi.shape), gy = Grid::zeros(vi.shape);
    detail::sobel_xy(vi, gx, gy);
    Grid out = Grid::zeros(vi.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::hypot(gx.data[i], gy.data[i]);

    int32_t ii = img.idx;
    int32_t self = static_cast<int32_t>(t.size());
    return t.make_node(
        std::move(out), t.requires_grad(img),
        [ii, self](Tape& tp) {
            static const double KX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
            static const double KY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
            const Grid& g = tp.grad(Var{&tp, self});
            const Grid& mag = tp.value(Var{&tp, self});
            const Grid& vi = tp.value(Var{&tp, ii});
            Grid& gi = tp.grad_mut(Var{&tp, ii});
            const int64_t H = vi.rows(), W = vi.cols();
            Grid gx = Grid::zeros(vi.shape), gy = Grid::zeros(vi.shape);
            detail::sobel_xy(vi, gx, gy);
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    double m = mag.at(y, x);
                    if (m <= 0.0) continue;
                    double go = g.at(y, x);
                    if (go == 0.0) continue;
                    double dgx = go * gx.at(y, x) / m;
                    double dgy = go * gy.at(y, x) / m;
                    for (int64_t dy = -1; dy <= 1; ++dy) {
                        int64_t yy = detail::clamp_idx(y + dy, H);
                        for (int64_t dx = -1; dx <= 1; ++dx) {
                            int64_t xx = detail::clamp_idx(x + dx, W);
                            gi.at(yy, xx) += KX[dy + 1][dx + 1] * dgx + KY[dy + 1][dx + 1] * dgy;
                        }
                    }
                }
        },
        "sobel");
}

inline Var warp(Var img, Var field) {
    Tape& t = *img.tape;
    Grid out = warp(t.value(img), t.value(field));
    int32_t ii = img.idx, fi = field.idx;
    bool rg = t.requires_grad(img) || t.requires_grad(field);
    int32_t self = static_cast<int32_t>(t.size());
    return t.make_node(
        std::move(out), rg,
        [ii, fi, self](Tape& tp) {
            const Grid& g = tp.grad(Var{&tp, self});
            const Grid& vi = tp.value(Var{&tp, ii});
            const Grid& vf = tp.value(Var{&tp, fi});
            const bool rgi = tp.requires_grad(Var{&tp, ii});
            const bool rgf = tp.requires_grad(Var{&tp, fi});
            const int64_t H = vi.rows(), W = vi.cols();
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    double go = g.at(y, x);
                    if (go == 0.0) continue;
                    double sx = static_cast<double>(x) + vf.at(y, x, 0);
                    double sy = static_cast<double>(y) + vf.at(y, x, 1);
                    detail::Bilinear b = detail::bilinear_at(sx, sy, H, W);
                    if (rgi) {
                        Grid& gi = tp.grad_mut(Var{&tp, ii});
                        gi.at(b.y0, b.x0) += go * (1.0 - b.wy) * (1.0 - b.wx);
                        gi.at(b.y0, b.x1) += go * (1.0 - b.wy) * b.wx;
                        gi.at(b.y1, b.x0) += go * b.wy * (1.0 - b.wx);
                        gi.at(b.y1, b.x1) += go * b.wy * b.wx;
                    }
                    if (rgf) {
                        Grid& gf = tp.grad_mut(Var{&tp, fi});
                        double dvx = (1.0 - b.wy) * (vi.at(b.y0, b.x1) - vi.at(b.y0, b.x0)) +
                                     b.wy * (vi.at(b.y1, b.x1) - vi.at(b.y1, b.x0));
                        double dvy = (1.0 - b.wx) * (vi.at(b.y1, b.x0) - vi.at(b.y0, b.x0)) +
                                     b.wx * (vi.at(b.y1, b.x1) - vi.at(b.y0, b.x1));
                        gf.at(y, x, 0) += go * dvx;
                        gf.at(y, x, 1) += go * dvy;
                    }
                }
        },
        "warp");
}

inline Var upsample_field(Var cgrid, int64_t H, int64_t W) {
    Tape& t = *cgrid.tape;
    Grid out = upsample_field(t.value(cgrid), H, W);
    int32_t ci = cgrid.idx;
    int32_t self = static_cast<int32_t>(t.size());
    const int64_t Gh = t.value(cgrid).shape[0], Gw = t.value(cgrid).shape[1];
    return t.make_node(
        std::move(out), t.requires_grad(cgrid),
        [ci, self, H, W, Gh, Gw](Tape& tp) {
            const Grid& g = tp.grad(Var{&tp, self});
            Grid& gc = tp.grad_mut(Var{&tp, ci});
            for (int64_t y = 0; y < H; ++y) {
                double u = H == 1 ? 0.0
                                  : static_cast<double>(y) * static_cast<double>(Gh - 1) /
                                        static_cast<double>(H - 1);
                int64_t r0 = std::min<int64_t>(static_cast<int64_t>(u), Gh - 2);
                double wu = u - static_cast<double>(r0);
                for (int64_t x = 0; x < W; ++x) {
                    double v = W == 1 ? 0.0
                                      : static_cast<double>(x) * static_cast<double>(Gw - 1) /
                                            static_cast<double>(W - 1);
                    int64_t c0 = std::min<int64_t>(static_cast<int64_t>(v), Gw - 2);
                    double wv = v - static_cast<double>(c0);
                    for (int64_t k = 0; k < 2; ++k) {
                        double go = g.at(y, x, k);
                        if (go == 0.0) continue;
                        gc.at(r0, c0, k) += go * (1.0 - wu) * (1.0 - wv);
                        gc.at(r0, c0 + 1, k) += go * (1.0 - wu) * wv;
                        gc.at(r0 + 1, c0, k) += go * wu * (1.0 - wv);
                        gc.at(r0 + 1, c0 + 1, k) += go * wu * wv;
                    }
                }
            }
        },
        "upsample_field");
}

inline Var avgpool(Var img, int64_t k) {
    Tape& t = *img.tape;
    Grid out = avgpool(t.value(img), k);
    int32_t ii = img.idx;
    int32_t self = static_cast<int32_t>(t.size());
    const int64_t H = t.value(img).rows(), W = t.value(img).cols();
    return t.make_node(std::move(out), t.requires_grad(img),
                       [ii, self, k, H, W](Tape& tp) {
                           const Grid& g = tp.grad(Var{&tp, self});
                           Grid& gi = tp.grad_mut(Var{&tp, ii});
                           const int64_t Ho = g.rows(), Wo = g.cols();
                           for (int64_t by = 0; by < Ho; ++by)
                               for (int64_t bx = 0; bx < Wo; ++bx) {
                                   int64_t y1 = std::min(H, (by + 1) * k);
                                   int64_t x1 = std::min(W, (bx + 1) * k);
                                   double cnt = static_cast<double>((y1 - by * k) * (x1 - bx * k));
                                   double go = g.at(by, bx) / cnt;
                                   if (go == 0.0) continue;
                                   for (int64_t y = by * k; y < y1; ++y)
                                       for (int64_t x = bx * k; x < x1; ++x) gi.at(y, x) += go;
                               }
                       },
                       "avgpool");
}

inline Var field_sq_grad(Var field) {
    Tape& t = *field.tape;
    double s = field_sq_grad_sum(t.value(field));
    int32_t fi = field.idx;
    int32_t self = static_cast<int32_t>(t.size());
    return t.make_node(Grid::scalar(s), t.requires_grad(field),
                       [fi, self](Tape& tp) {
                           double g = tp.grad(Var{&tp, self}).data[0];
                           const Grid& vf = tp.value(Var{&tp, fi});
                           Grid& gf = tp.grad_mut(Var{&tp, fi});
                           const int64_t H = vf.shape[0], W = vf.shape[1];
                           for (int64_t k = 0; k < 2; ++k) {
                               for (int64_t y = 0; y < H; ++y)
                                   for (int64_t x = 0; x + 1 < W; ++x) {
                                       double d = vf.at(y, x + 1, k) - vf.at(y, x, k);
                                       gf.at(y, x + 1, k) += 2.0 * d * g;
                                       gf.at(y, x, k) -= 2.0 * d * g;
                                   }
                               for (int64_t y = 0; y + 1 < H; ++y)
                                   for (int64_t x = 0; x < W; ++x) {
                                       double d = vf.at(y + 1, x, k) - vf.at(y, x, k);
                                       gf.at(y + 1, x, k) += 2.0 * d * g;
                                       gf.at(y, x, k) -= 2.0 * d * g;
                                   }
                           }
                       },
                       "field_spatial_grad");
}

} // namespace hyalign
