#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fdisc/error.hpp"

namespace fdisc {

/// 8-bit grayscale pixel grid, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

    bool empty() const noexcept { return width <= 0 || height <= 0 || pixels.empty(); }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Floating-point working image used by the matchers.
struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Bilinear resampling to `out_w` x `out_h`, pixel centres aligned.
inline FloatImage resize_bilinear(const GrayImage& src, int out_w, int out_h) {
    if (src.empty()) throw Error(Errc::EmptyImage, "cannot resize an empty image");
    FloatImage out{out_w, out_h, std::vector<double>(static_cast<std::size_t>(out_w) * out_h)};
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double wx = fx - x0;
            double top = (1.0 - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
            double bottom = (1.0 - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
            out.values[static_cast<std::size_t>(y) * out_w + x] = (1.0 - wy) * top + wy * bottom;
        }
    }
    return out;
}

namespace detail {

inline void skip_pgm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline int read_pgm_int(std::istream& in, const std::string& origin) {
    skip_pgm_space(in);
    int value = -1;
    if (!(in >> value) || value < 0) throw Error(Errc::ParseError, origin + ": malformed PGM header");
    return value;
}

} // namespace detail

/// Reads binary (P5) or ASCII (P2) PGM with maxval <= 255.
inline GrayImage read_pgm(std::istream& in, const std::string& origin = "<pgm>") {
    std::string magic(2, '\0');
    if (!in.read(magic.data(), 2) || (magic != "P5" && magic != "P2"))
        throw Error(Errc::ParseError, origin + ": not a PGM file");
    int w = detail::read_pgm_int(in, origin);
    int h = detail::read_pgm_int(in, origin);
    int maxval = detail::read_pgm_int(in, origin);
    if (w == 0 || h == 0) throw Error(Errc::EmptyImage, origin + ": zero-area image");
    if (maxval == 0 || maxval > 255) throw Error(Errc::ParseError, origin + ": only 8-bit PGM is supported");

    GrayImage img(w, h);
    if (magic == "P5") {
        in.get(); // single whitespace byte after maxval
        if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size())))
            throw Error(Errc::ParseError, origin + ": truncated pixel data");
    } else {
        for (auto& p : img.pixels) {
            int v = detail::read_pgm_int(in, origin);
            if (v > maxval) throw Error(Errc::ParseError, origin + ": pixel exceeds maxval");
            p = static_cast<std::uint8_t>(v);
        }
    }
    if (maxval != 255) {
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
    }
    return img;
}

inline GrayImage read_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    return read_pgm(in, path);
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

} // namespace fdisc
