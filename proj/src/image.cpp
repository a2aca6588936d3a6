#include "skelbench/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace skelbench {

std::size_t BinaryMask::foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy) {
    BinaryMask out(mask.width, mask.height);
    const int w = static_cast<int>(mask.width);
    const int h = static_cast<int>(mask.height);
    for (int r = 0; r < h; ++r) {
        const int nr = r + dy;
        if (nr < 0 || nr >= h) continue;
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            const int nc = c + dx;
            if (nc < 0 || nc >= w) continue;
            out.set(nr, nc, true);
        }
    }
    return out;
}

BBox bounding_box(const BinaryMask& mask) {
    BBox box{mask.height, mask.width, 0, 0};
    bool found = false;
    for (std::uint32_t r = 0; r < mask.height; ++r) {
        for (std::uint32_t c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            found = true;
            box.rmin = std::min(box.rmin, r);
            box.rmax = std::max(box.rmax, r);
            box.cmin = std::min(box.cmin, c);
            box.cmax = std::max(box.cmax, c);
        }
    }
    if (!found) throw EmptyMaskError("bounding_box: mask has no foreground pixels");
    return box;
}

namespace {

// Felzenszwalb-Huttenlocher 1-D squared distance transform: lower envelope
// of the parabolas y = f[q] + (x - q)^2.
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[k];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const int p = v[k];
        d[q] = (q - p) * static_cast<double>(q - p) + f[p];
    }
}

} // namespace

GrayImage distance_transform(const BinaryMask& mask) {
    const int w = static_cast<int>(mask.width);
    const int h = static_cast<int>(mask.height);
    GrayImage out(mask.width, mask.height);
    if (w == 0 || h == 0) return out;

    constexpr double kInf = 1e18;
    std::vector<double> g(static_cast<std::size_t>(w) * h);

    // Pass 1: columns.
    {
        std::vector<double> f(h), d(h);
        std::vector<int> v(h);
        std::vector<double> z(h + 1);
        for (int c = 0; c < w; ++c) {
            for (int r = 0; r < h; ++r) f[r] = mask.at(r, c) ? kInf : 0.0;
            edt_1d(f.data(), d.data(), h, v.data(), z.data());
            for (int r = 0; r < h; ++r) g[static_cast<std::size_t>(r) * w + c] = d[r];
        }
    }
    // Pass 2: rows.
    {
        std::vector<double> d(w);
        std::vector<int> v(w);
        std::vector<double> z(w + 1);
        for (int r = 0; r < h; ++r) {
            edt_1d(&g[static_cast<std::size_t>(r) * w], d.data(), w, v.data(), z.data());
            for (int c = 0; c < w; ++c) {
                // Out-of-frame pixels count as background; the nearest one is
                // axis-aligned, so min with the border distance stays exact.
                const double border = std::min(std::min(r + 1, h - r), std::min(c + 1, w - c));
                out.at(r, c) = std::min(std::sqrt(d[c]), border);
            }
        }
    }
    return out;
}

Components connected_components(const BinaryMask& mask) {
    Components comps;
    comps.labels.assign(mask.pixel_count(), 0);
    const int w = static_cast<int>(mask.width);
    const int h = static_cast<int>(mask.height);
    std::vector<std::size_t> stack;
    std::uint32_t next_label = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * w + c;
            if (!mask.data[idx] || comps.labels[idx] != 0) continue;
            ++next_label;
            comps.labels[idx] = next_label;
            stack.push_back(idx);
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                const int cr = static_cast<int>(cur / w);
                const int cc = static_cast<int>(cur % w);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        const std::size_t nidx = static_cast<std::size_t>(nr) * w + nc;
                        if (mask.data[nidx] && comps.labels[nidx] == 0) {
                            comps.labels[nidx] = next_label;
                            stack.push_back(nidx);
                        }
                    }
                }
            }
        }
    }
    comps.count = next_label;
    return comps;
}

} // namespace skelbench
