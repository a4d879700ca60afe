#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hyalign/errors.hpp"
#include "hyalign/grid.hpp"

namespace hyalign {

// shortest exact decimal representation (round-trips a double)
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Binary PGM (P5, maxval 255). Quantization to 8 bits happens exactly once,
// here; reading maps levels back to v/255.
inline void write_pgm(const std::string& path, const Grid& img) {
    if (img.shape.size() != 2) throw std::invalid_argument("write_pgm: rank != 2");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
    std::vector<unsigned char> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        bytes[i] = static_cast<unsigned char>(std::llround(clamp01(img.data[i]) * 255.0));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path);
}

namespace detail {

// next whitespace-delimited token, skipping '#' comment lines
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

} // namespace detail

inline Grid read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path);
    std::string magic = detail::pgm_token(in);
    if (magic != "P5")
        throw std::invalid_argument("read_pgm: not a binary PGM (P5): " + path);
    int64_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoll(detail::pgm_token(in));
        h = std::stoll(detail::pgm_token(in));
        maxval = std::stoll(detail::pgm_token(in));
    } catch (const std::exception&) {
        throw std::invalid_argument("read_pgm: malformed header in " + path);
    }
    if (w < 1 || h < 1 || maxval != 255)
        throw std::invalid_argument("read_pgm: unsupported header in " + path);
    std::vector<unsigned char> bytes(static_cast<size_t>(w * h));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw std::invalid_argument("read_pgm: truncated pixel data in " + path);
    Grid img = Grid::zeros({h, w});
    for (size_t i = 0; i < bytes.size(); ++i)
        img.data[i] = static_cast<double>(bytes[i]) / 255.0;
    return img;
}

// Displacement field sidecar: "DFIELD H W" then H*W rows of "dx dy".
inline void write_field(const std::string& path, const Grid& field) {
    if (field.shape.size() != 3 || field.shape[2] != 2)
        throw std::invalid_argument("write_field: not an H x W x 2 field");
    std::ofstream out(path);
    if (!out) throw IoError("write_field: cannot open " + path);
    const int64_t H = field.shape[0], W = field.shape[1];
    out << "DFIELD " << H << " " << W << "\n";
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            out << fmt_double(field.at(y, x, 0)) << " " << fmt_double(field.at(y, x, 1)) << "\n";
    if (!out) throw IoError("write_field: write failed for " + path);
}

inline Grid read_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_field: cannot open " + path);
    std::string magic;
    int64_t H = 0, W = 0;
    if (!(in >> magic >> H >> W) || magic != "DFIELD" || H < 1 || W < 1)
        throw std::invalid_argument("read_field: malformed header in " + path);
    Grid f = Grid::zeros({H, W, 2});
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            if (!(in >> f.at(y, x, 0) >> f.at(y, x, 1)))
                throw std::invalid_argument("read_field: truncated data in " + path);
    return f;
}

// Landmark sidecar: "LANDMARKS N" then N rows of "vr vc tr tc".
inline void write_landmarks(const std::string& path,
                            const std::vector<std::array<double, 2>>& lm_v,
                            const std::vector<std::array<double, 2>>& lm_t) {
    if (lm_v.size() != lm_t.size())
        throw std::invalid_argument("write_landmarks: list length mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("write_landmarks: cannot open " + path);
    out << "LANDMARKS " << lm_v.size() << "\n";
    for (size_t i = 0; i < lm_v.size(); ++i)
        out << fmt_double(lm_v[i][0]) << " " << fmt_double(lm_v[i][1]) << " "
            << fmt_double(lm_t[i][0]) << " " << fmt_double(lm_t[i][1]) << "\n";
    if (!out) throw IoError("write_landmarks: write failed for " + path);
}

inline void read_landmarks(const std::string& path, std::vector<std::array<double, 2>>& lm_v,
                           std::vector<std::array<double, 2>>& lm_t) {
    std::ifstream in(path);
    if (!in) throw IoError("read_landmarks: cannot open " + path);
    std::string magic;
    size_t n = 0;
    if (!(in >> magic >> n) || magic != "LANDMARKS")
        throw std::invalid_argument("read_landmarks: malformed header in " + path);
    lm_v.assign(n, {0.0, 0.0});
    lm_t.assign(n, {0.0, 0.0});
    for (size_t i = 0; i < n; ++i)
        if (!(in >> lm_v[i][0] >> lm_v[i][1] >> lm_t[i][0] >> lm_t[i][1]))
            throw std::invalid_argument("read_landmarks: truncated data in " + path);
}

} // namespace hyalign
