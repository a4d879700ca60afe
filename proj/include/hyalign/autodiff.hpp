#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyalign/grid.hpp"

namespace hyalign {

class Tape;

// Handle to a node on a tape. Copyable, cheap, only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int32_t idx = -1;
    bool valid() const { return tape != nullptr && idx >= 0; }
};

// Reverse-mode differentiation over a recorded computation history. The
// history is append-only; backward() walks it once in reverse creation order,
// which makes gradient accumulation deterministic (bit-identical for
// identical inputs). One backward pass per tape; rebuild the tape to rerun.
class Tape {
public:
    Tape() { nodes_.reserve(1024); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Grid value, bool requires_grad = false) {
        require_finite(value, "leaf");
        return push(std::move(value), requires_grad, nullptr);
    }

    Var scalar(double v) { return leaf(Grid::scalar(v)); }

    const Grid& value(Var v) const { return node(v).value; }
    const Grid& grad(Var v) const { return node(v).grad; }
    Grid& grad_mut(Var v) { return node(v).grad; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    // Extension point for fused operations defined in other headers.
    // The closure receives the tape and must scatter into parents' grads.
    Var make_node(Grid value, bool requires_grad, std::function<void(Tape&)> back,
                  const char* opname) {
        if (!value.all_finite())
            throw NumericError(std::string("non-finite value produced by ") + opname);
        return push(std::move(value), requires_grad, requires_grad ? std::move(back) : nullptr);
    }

    void backward(Var root) {
        if (root.tape != this) throw std::invalid_argument("backward: foreign var");
        if (node(root).value.numel() != 1)
            throw std::invalid_argument("backward: root is not a scalar");
        if (backward_done_)
            throw std::logic_error("backward: already run on this tape");
        backward_done_ = true;
        node(root).grad.data[0] = 1.0;
        for (int32_t i = root.idx; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.requires_grad && n.back) n.back(*this);
        }
    }

    // ---- elementwise binary (equal shapes, or either side a scalar) ----

    Var add(Var a, Var b) {
        return binary("add", a, b, [](double x, double y) { return x + y; },
                      [](double g, double, double, double& ga, double& gb) {
                          ga += g;
                          gb += g;
                      });
    }
    Var sub(Var a, Var b) {
        return binary("sub", a, b, [](double x, double y) { return x - y; },
                      [](double g, double, double, double& ga, double& gb) {
                          ga += g;
                          gb -= g;
                      });
    }
    Var mul(Var a, Var b) {
        return binary("mul", a, b, [](double x, double y) { return x * y; },
                      [](double g, double x, double y, double& ga, double& gb) {
                          ga += g * y;
                          gb += g * x;
                      });
    }
    Var div(Var a, Var b) {
        return binary("div", a, b, [](double x, double y) { return x / y; },
                      [](double g, double x, double y, double& ga, double& gb) {
                          ga += g / y;
                          gb -= g * x / (y * y);
                      });
    }
    // ties route gradient to the first argument
    Var maximum(Var a, Var b) {
        return binary("maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
                      [](double g, double x, double y, double& ga, double& gb) {
                          if (x >= y) ga += g; else gb += g;
                      });
    }
    Var minimum(Var a, Var b) {
        return binary("minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
                      [](double g, double x, double y, double& ga, double& gb) {
                          if (x <= y) ga += g; else gb += g;
                      });
    }

    // ---- elementwise unary ----

    Var neg(Var a) {
        return unary("neg", a, [](double x) { return -x; },
                     [](double, double) { return -1.0; });
    }
    Var scale(Var a, double s) {
        return unary("scale", a, [s](double x) { return s * x; },
                     [s](double, double) { return s; });
    }
    Var shift(Var a, double s) {
        return unary("shift", a, [s](double x) { return x + s; },
                     [](double, double) { return 1.0; });
    }
    Var abs(Var a) {
        // subgradient convention: abs'(0) = 0
        return unary("abs", a, [](double x) { return std::fabs(x); },
                     [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    }
    Var square(Var a) {
        return unary("square", a, [](double x) { return x * x; },
                     [](double x, double) { return 2.0 * x; });
    }
    Var sqrt(Var a) {
        return unary("sqrt", a, [](double x) { return std::sqrt(x); },
                     [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
    }
    Var tanh(Var a) {
        return unary("tanh", a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
    }
    Var atanh(Var a) {
        for (double x : value(a).data)
            if (!(std::fabs(x) < 1.0))
                throw NumericError("atanh: argument outside (-1, 1)");
        return unary("atanh", a, [](double x) { return std::atanh(x); },
                     [](double x, double) { return 1.0 / (1.0 - x * x); });
    }
    Var exp(Var a) {
        return unary("exp", a, [](double x) { return std::exp(x); },
                     [](double, double y) { return y; });
    }
    Var log(Var a) {
        for (double x : value(a).data)
            if (!(x > 0.0)) throw NumericError("log: argument <= 0");
        return unary("log", a, [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
    }
    Var softplus(Var a) {
        return unary("softplus", a, [](double x) { return stable_softplus(x); },
                     [](double x, double) { return stable_sigmoid(x); });
    }
    Var sigmoid(Var a) {
        return unary("sigmoid", a, [](double x) { return stable_sigmoid(x); },
                     [](double, double y) { return y * (1.0 - y); });
    }

    // ---- reductions and vector ops ----

    Var sum(Var a) {
        double s = 0.0;
        for (double x : value(a).data) s += x;
        int32_t ai = a.idx;
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(Grid::scalar(s), requires_grad(a),
                         [ai, self](Tape& t) {
                             double g = t.nodes_[static_cast<size_t>(self)].grad.data[0];
                             Grid& ga = t.nodes_[static_cast<size_t>(ai)].grad;
                             for (double& x : ga.data) x += g;
                         },
                         "sum");
    }

    Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(value(a).numel())); }

    Var dot(Var a, Var b) {
        const Grid& va = value(a);
        const Grid& vb = value(b);
        if (va.numel() != vb.numel())
            throw std::invalid_argument("dot: length mismatch");
        double s = 0.0;
        for (int64_t i = 0; i < va.numel(); ++i)
            s += va.data[static_cast<size_t>(i)] * vb.data[static_cast<size_t>(i)];
        int32_t ai = a.idx, bi = b.idx;
        bool rg = requires_grad(a) || requires_grad(b);
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(Grid::scalar(s), rg,
                         [ai, bi, self](Tape& t) {
                             double g = t.nodes_[static_cast<size_t>(self)].grad.data[0];
                             const Grid& va = t.nodes_[static_cast<size_t>(ai)].value;
                             const Grid& vb = t.nodes_[static_cast<size_t>(bi)].value;
                             if (t.nodes_[static_cast<size_t>(ai)].requires_grad) {
                                 Grid& ga = t.nodes_[static_cast<size_t>(ai)].grad;
                                 for (size_t i = 0; i < ga.data.size(); ++i)
                                     ga.data[i] += g * vb.data[i];
                             }
                             if (t.nodes_[static_cast<size_t>(bi)].requires_grad) {
                                 Grid& gb = t.nodes_[static_cast<size_t>(bi)].grad;
                                 for (size_t i = 0; i < gb.data.size(); ++i)
                                     gb.data[i] += g * va.data[i];
                             }
                         },
                         "dot");
    }

    // L2 norm with subgradient 0 at the origin
    Var vec_norm(Var a) {
        const Grid& va = value(a);
        double s = 0.0;
        for (double x : va.data) s += x * x;
        double r = std::sqrt(s);
        int32_t ai = a.idx;
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(Grid::scalar(r), requires_grad(a),
                         [ai, self, r](Tape& t) {
                             if (r <= 0.0) return;
                             double g = t.nodes_[static_cast<size_t>(self)].grad.data[0];
                             const Grid& va = t.nodes_[static_cast<size_t>(ai)].value;
                             Grid& ga = t.nodes_[static_cast<size_t>(ai)].grad;
                             for (size_t i = 0; i < ga.data.size(); ++i)
                                 ga.data[i] += g * va.data[i] / r;
                         },
                         "vec_norm");
    }

    // x - mean(x), fused
    Var center(Var a) {
        const Grid& va = value(a);
        double m = 0.0;
        for (double x : va.data) m += x;
        m /= static_cast<double>(va.numel());
        Grid out = va;
        for (double& x : out.data) x -= m;
        int32_t ai = a.idx;
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), requires_grad(a),
                         [ai, self](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             double gm = 0.0;
                             for (double x : g.data) gm += x;
                             gm /= static_cast<double>(g.data.size());
                             Grid& ga = t.nodes_[static_cast<size_t>(ai)].grad;
                             for (size_t i = 0; i < ga.data.size(); ++i)
                                 ga.data[i] += g.data[i] - gm;
                         },
                         "center");
    }

    // N-ary sum of same-shape vars
    Var add_n(const std::vector<Var>& xs) {
        if (xs.empty()) throw std::invalid_argument("add_n: empty");
        Grid out = value(xs[0]);
        for (size_t k = 1; k < xs.size(); ++k) {
            const Grid& v = value(xs[k]);
            require_same_shape(out, v, "add_n");
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += v.data[i];
        }
        std::vector<int32_t> parents;
        bool rg = false;
        for (Var x : xs) {
            parents.push_back(x.idx);
            rg = rg || requires_grad(x);
        }
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), rg,
                         [parents, self](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             for (int32_t pi : parents) {
                                 Node& p = t.nodes_[static_cast<size_t>(pi)];
                                 if (!p.requires_grad) continue;
                                 for (size_t i = 0; i < g.data.size(); ++i)
                                     p.grad.data[i] += g.data[i];
                             }
                         },
                         "add_n");
    }

    // rectangular block of a 2-D grid, flattened to a vector
    Var block2d(Var src, int64_t r0, int64_t c0, int64_t h, int64_t w) {
        const Grid& vs = value(src);
        if (vs.shape.size() != 2) throw std::invalid_argument("block2d: rank != 2");
        if (r0 < 0 || c0 < 0 || h < 1 || w < 1 || r0 + h > vs.rows() || c0 + w > vs.cols())
            throw std::invalid_argument("block2d: block out of bounds");
        Grid out = Grid::zeros({h * w});
        for (int64_t r = 0; r < h; ++r)
            for (int64_t c = 0; c < w; ++c)
                out.data[static_cast<size_t>(r * w + c)] = vs.at(r0 + r, c0 + c);
        int32_t si = src.idx;
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), requires_grad(src),
                         [si, self, r0, c0, h, w](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             Grid& gs = t.nodes_[static_cast<size_t>(si)].grad;
                             for (int64_t r = 0; r < h; ++r)
                                 for (int64_t c = 0; c < w; ++c)
                                     gs.at(r0 + r, c0 + c) += g.data[static_cast<size_t>(r * w + c)];
                         },
                         "block2d");
    }

    // W {m,n} * x {n} + b {m}
    Var affine(Var W, Var x, Var b) {
        const Grid& vw = value(W);
        const Grid& vx = value(x);
        const Grid& vb = value(b);
        if (vw.shape.size() != 2) throw std::invalid_argument("affine: W rank != 2");
        int64_t m = vw.rows(), n = vw.cols();
        if (vx.numel() != n || vb.numel() != m)
            throw std::invalid_argument("affine: shape mismatch");
        Grid out = Grid::zeros({m});
        for (int64_t i = 0; i < m; ++i) {
            double s = vb.data[static_cast<size_t>(i)];
            const double* wrow = &vw.data[static_cast<size_t>(i * n)];
            for (int64_t j = 0; j < n; ++j) s += wrow[j] * vx.data[static_cast<size_t>(j)];
            out.data[static_cast<size_t>(i)] = s;
        }
        int32_t wi = W.idx, xi = x.idx, bi = b.idx;
        bool rg = requires_grad(W) || requires_grad(x) || requires_grad(b);
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), rg,
                         [wi, xi, bi, self, m, n](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             Node& wn = t.nodes_[static_cast<size_t>(wi)];
                             Node& xn = t.nodes_[static_cast<size_t>(xi)];
                             Node& bn = t.nodes_[static_cast<size_t>(bi)];
                             for (int64_t i = 0; i < m; ++i) {
                                 double gi = g.data[static_cast<size_t>(i)];
                                 if (gi == 0.0) continue;
                                 if (wn.requires_grad) {
                                     double* gw = &wn.grad.data[static_cast<size_t>(i * n)];
                                     for (int64_t j = 0; j < n; ++j)
                                         gw[j] += gi * xn.value.data[static_cast<size_t>(j)];
                                 }
                                 if (xn.requires_grad) {
                                     const double* wrow = &wn.value.data[static_cast<size_t>(i * n)];
                                     for (int64_t j = 0; j < n; ++j)
                                         xn.grad.data[static_cast<size_t>(j)] += gi * wrow[j];
                                 }
                                 if (bn.requires_grad) bn.grad.data[static_cast<size_t>(i)] += gi;
                             }
                         },
                         "affine");
    }

    static double stable_softplus(double x) {
        double ax = std::fabs(x);
        return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-ax));
    }
    static double stable_sigmoid(double x) {
        if (x >= 0.0) {
            double e = std::exp(-x);
            return 1.0 / (1.0 + e);
        }
        double e = std::exp(x);
        return e / (1.0 + e);
    }

private:
    struct Node {
        Grid value;
        Grid grad;
        bool requires_grad;
        std::function<void(Tape&)> back;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    friend struct Var;

    Node& node(Var v) {
        if (v.tape != this || v.idx < 0 || v.idx >= static_cast<int32_t>(nodes_.size()))
            throw std::invalid_argument("Tape: invalid var");
        return nodes_[static_cast<size_t>(v.idx)];
    }
    const Node& node(Var v) const {
        if (v.tape != this || v.idx < 0 || v.idx >= static_cast<int32_t>(nodes_.size()))
            throw std::invalid_argument("Tape: invalid var");
        return nodes_[static_cast<size_t>(v.idx)];
    }

    Var push(Grid value, bool rg, std::function<void(Tape&)> back) {
        Node n;
        n.grad = Grid::zeros(value.shape);
        n.value = std::move(value);
        n.requires_grad = rg;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
    }

    template <class F, class B>
    Var unary(const char* name, Var a, F f, B dfdx) {
        const Grid& va = value(a);
        Grid out = va;
        for (double& x : out.data) x = f(x);
        int32_t ai = a.idx;
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), requires_grad(a),
                         [ai, self, dfdx](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             const Grid& vout = t.nodes_[static_cast<size_t>(self)].value;
                             const Grid& va = t.nodes_[static_cast<size_t>(ai)].value;
                             Grid& ga = t.nodes_[static_cast<size_t>(ai)].grad;
                             for (size_t i = 0; i < ga.data.size(); ++i)
                                 ga.data[i] += g.data[i] * dfdx(va.data[i], vout.data[i]);
                         },
                         name);
    }

    template <class F, class B>
    Var binary(const char* name, Var a, Var b, F f, B back) {
        if (a.tape != this || b.tape != this)
            throw std::invalid_argument("binary op: vars from different tapes");
        const Grid& va = value(a);
        const Grid& vb = value(b);
        const bool sa = va.numel() == 1, sb = vb.numel() == 1;
        if (!sa && !sb && !va.same_shape(vb))
            throw std::invalid_argument(std::string(name) + ": shape mismatch");
        const Grid& shape_src = sa ? vb : va;
        Grid out = Grid::zeros(shape_src.shape);
        int64_t n = out.numel();
        for (int64_t i = 0; i < n; ++i) {
            double x = va.data[static_cast<size_t>(sa ? 0 : i)];
            double y = vb.data[static_cast<size_t>(sb ? 0 : i)];
            out.data[static_cast<size_t>(i)] = f(x, y);
        }
        int32_t ai = a.idx, bi = b.idx;
        bool rg = requires_grad(a) || requires_grad(b);
        int32_t self = static_cast<int32_t>(nodes_.size());
        return make_node(std::move(out), rg,
                         [ai, bi, self, sa, sb, n, back](Tape& t) {
                             const Grid& g = t.nodes_[static_cast<size_t>(self)].grad;
                             Node& an = t.nodes_[static_cast<size_t>(ai)];
                             Node& bn = t.nodes_[static_cast<size_t>(bi)];
                             for (int64_t i = 0; i < n; ++i) {
                                 double gi = g.data[static_cast<size_t>(i)];
                                 double x = an.value.data[static_cast<size_t>(sa ? 0 : i)];
                                 double y = bn.value.data[static_cast<size_t>(sb ? 0 : i)];
                                 double dummy_a = 0.0, dummy_b = 0.0;
                                 double& ga = an.requires_grad
                                                  ? an.grad.data[static_cast<size_t>(sa ? 0 : i)]
                                                  : dummy_a;
                                 double& gb = bn.requires_grad
                                                  ? bn.grad.data[static_cast<size_t>(sb ? 0 : i)]
                                                  : dummy_b;
                                 back(gi, x, y, ga, gb);
                             }
                         },
                         name);
    }
};

// Operator sugar; both operands must live on the same tape.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator*(Var a, double s) { return a.tape->scale(a, s); }
inline Var operator+(Var a, double s) { return a.tape->shift(a, s); }
inline Var operator+(double s, Var a) { return a.tape->shift(a, s); }
inline Var operator-(Var a, double s) { return a.tape->shift(a, -s); }
inline Var operator-(double s, Var a) { return a.tape->shift(a.tape->neg(a), s); }

} // namespace hyalign
