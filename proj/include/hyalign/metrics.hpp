#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "hyalign/grid.hpp"
#include "hyalign/imgproc.hpp"

namespace hyalign {

// Edge pixels as (row, col) integer coordinates.
struct EdgeSet {
    std::vector<std::pair<int64_t, int64_t>> points;
    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

struct SurfaceDistances {
    double hd = 0.0;
    double hd95 = 0.0;
    double assd = 0.0;
};

struct MetricsReport {
    std::optional<double> hd, hd95, assd; // absent when an edge set is empty
    double dsc = 0.0;
    double mee = 0.0;
    double sf = 0.0;
    double en = 0.0;
};

namespace detail {

// linear interpolation between order statistics (sorted input)
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile: empty");
    if (sorted.size() == 1) return sorted[0];
    double pos = q * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    if (lo >= sorted.size() - 1) return sorted.back();
    double w = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

// Directed nearest-neighbor distances from each point of A to the set B,
// using row buckets with radius pruning (exact; the quadratic scan lives in
// the tests as the independent oracle).
inline std::vector<double> directed_distances(const EdgeSet& A, const EdgeSet& B) {
    std::map<int64_t, std::vector<int64_t>> rows;
    for (auto [r, c] : B.points) rows[r].push_back(c);
    for (auto& [r, cs] : rows) std::sort(cs.begin(), cs.end());
    const int64_t rmin = rows.begin()->first;
    const int64_t rmax = rows.rbegin()->first;

    std::vector<double> out;
    out.reserve(A.points.size());
    for (auto [ar, ac] : A.points) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t dr = 0;; ++dr) {
            double drr = static_cast<double>(dr) * static_cast<double>(dr);
            if (drr >= best) break;
            if (ar + dr > rmax && ar - dr < rmin) break; // no candidate rows left
            for (int sgn : {+1, -1}) {
                if (dr == 0 && sgn < 0) continue;
                int64_t r = ar + sgn * dr;
                if (r < rmin || r > rmax) continue;
                auto it = rows.find(r);
                if (it == rows.end()) continue;
                const std::vector<int64_t>& cs = it->second;
                auto lb = std::lower_bound(cs.begin(), cs.end(), ac);
                // walk outward from the insertion point, pruning by best
                for (auto fwd = lb; fwd != cs.end(); ++fwd) {
                    double dc = static_cast<double>(*fwd - ac);
                    if (dc * dc >= best) break;
                    best = std::min(best, drr + dc * dc);
                }
                for (auto back = lb; back != cs.begin();) {
                    --back;
                    double dc = static_cast<double>(*back - ac);
                    if (dc * dc >= best) break;
                    best = std::min(best, drr + dc * dc);
                }
            }
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

} // namespace detail

// Pixels whose Sobel magnitude strictly exceeds the given quantile of all
// magnitudes. Constant images yield an empty set (flagged by the distance
// metrics downstream).
inline EdgeSet binarize_edges(const Grid& img, double quantile = 0.90) {
    if (!(quantile > 0.0 && quantile < 1.0))
        throw std::invalid_argument("binarize_edges: quantile outside (0, 1)");
    Grid mag = sobel_mag(img);
    std::vector<double> sorted = mag.data;
    std::sort(sorted.begin(), sorted.end());
    double thr = detail::percentile_sorted(sorted, quantile);
    EdgeSet set;
    for (int64_t r = 0; r < mag.rows(); ++r)
        for (int64_t c = 0; c < mag.cols(); ++c)
            if (mag.at(r, c) > thr) set.points.emplace_back(r, c);
    return set;
}

// HD / HD95 / ASSD over two non-empty point sets.
inline SurfaceDistances surface_distances(const EdgeSet& A, const EdgeSet& B) {
    if (A.empty() || B.empty())
        throw std::invalid_argument("surface_distances: empty edge set");
    std::vector<double> dab = detail::directed_distances(A, B);
    std::vector<double> dba = detail::directed_distances(B, A);
    SurfaceDistances s;
    double mab = *std::max_element(dab.begin(), dab.end());
    double mba = *std::max_element(dba.begin(), dba.end());
    s.hd = std::max(mab, mba);
    std::vector<double> sab = dab, sba = dba;
    std::sort(sab.begin(), sab.end());
    std::sort(sba.begin(), sba.end());
    s.hd95 = std::max(detail::percentile_sorted(sab, 0.95), detail::percentile_sorted(sba, 0.95));
    double sum = 0.0;
    for (double d : dab) sum += d;
    for (double d : dba) sum += d;
    s.assd = sum / static_cast<double>(dab.size() + dba.size());
    return s;
}

inline double dice(const EdgeSet& A, const EdgeSet& B) {
    if (A.empty() && B.empty()) return 1.0;
    std::vector<std::pair<int64_t, int64_t>> a = A.points, b = B.points;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else { ++inter; ++ia; ++ib; }
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a.size() + b.size());
}

// median of squared per-pixel errors on the 0..255 intensity scale
inline double mee(const Grid& result, const Grid& reference) {
    require_same_shape(result, reference, "mee");
    std::vector<double> sq(result.data.size());
    for (size_t i = 0; i < sq.size(); ++i) {
        double e = 255.0 * (result.data[i] - reference.data[i]);
        sq[i] = e * e;
    }
    size_t n = sq.size();
    size_t mid = n / 2;
    std::nth_element(sq.begin(), sq.begin() + static_cast<int64_t>(mid), sq.end());
    double upper = sq[mid];
    if (n % 2 == 1) return upper;
    double lower = *std::max_element(sq.begin(), sq.begin() + static_cast<int64_t>(mid));
    return 0.5 * (lower + upper);
}

// root of mean squared forward differences, row- and column-wise, 0..255 scale
inline double spatial_frequency(const Grid& img) {
    if (img.shape.size() != 2) throw std::invalid_argument("spatial_frequency: rank != 2");
    const int64_t H = img.rows(), W = img.cols();
    double rf = 0.0, cf = 0.0;
    int64_t nr = 0, nc = 0;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x + 1 < W; ++x) {
            double d = 255.0 * (img.at(y, x + 1) - img.at(y, x));
            rf += d * d;
            ++nr;
        }
    for (int64_t y = 0; y + 1 < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            double d = 255.0 * (img.at(y + 1, x) - img.at(y, x));
            cf += d * d;
            ++nc;
        }
    rf = nr > 0 ? std::sqrt(rf / static_cast<double>(nr)) : 0.0;
    cf = nc > 0 ? std::sqrt(cf / static_cast<double>(nc)) : 0.0;
    return std::sqrt(rf * rf + cf * cf);
}

// Shannon entropy (bits) of the 256-bin histogram of quantized intensities
inline double entropy(const Grid& img) {
    std::vector<int64_t> hist(256, 0);
    for (double v : img.data) {
        int64_t q = static_cast<int64_t>(std::llround(clamp01(v) * 255.0));
        hist[static_cast<size_t>(q)] += 1;
    }
    double n = static_cast<double>(img.numel());
    double h = 0.0;
    for (int64_t cnt : hist) {
        if (cnt == 0) continue;
        double p = static_cast<double>(cnt) / n;
        h -= p * std::log2(p);
    }
    return h;
}

// All seven scores for one result/reference pair. Distance metrics are
// reported absent (not zero) when either edge set is empty.
inline MetricsReport evaluate(const Grid& result, const Grid& reference, double quantile = 0.90) {
    require_same_shape(result, reference, "evaluate");
    MetricsReport rep;
    EdgeSet er = binarize_edges(result, quantile);
    EdgeSet ef = binarize_edges(reference, quantile);
    rep.dsc = dice(er, ef);
    if (!er.empty() && !ef.empty()) {
        SurfaceDistances s = surface_distances(er, ef);
        rep.hd = s.hd;
        rep.hd95 = s.hd95;
        rep.assd = s.assd;
    }
    rep.mee = mee(result, reference);
    rep.sf = spatial_frequency(result);
    rep.en = entropy(result);
    return rep;
}

} // namespace hyalign
