#include "skelbench/thinning.hpp"

#include <array>
#include <vector>

namespace skelbench {

namespace {

// Neighbor order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<std::array<int, 2>, 8> kNeighbors = {{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1},
}};

inline int px(const BinaryMask& m, int r, int c) {
    if (r < 0 || c < 0 || r >= static_cast<int>(m.height) || c >= static_cast<int>(m.width)) {
        return 0; // frame is background
    }
    return m.at(r, c) ? 1 : 0;
}

bool thin_subpass(BinaryMask& m, bool second) {
    const int h = static_cast<int>(m.height);
    const int w = static_cast<int>(m.width);
    std::vector<std::size_t> doomed;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!m.at(r, c)) continue;
            int n[8];
            int b = 0;
            for (int k = 0; k < 8; ++k) {
                n[k] = px(m, r + kNeighbors[k][0], c + kNeighbors[k][1]);
                b += n[k];
            }
            if (b < 2 || b > 6) continue;
            int a = 0;
            for (int k = 0; k < 8; ++k) {
                if (n[k] == 0 && n[(k + 1) % 8] == 1) ++a;
            }
            if (a != 1) continue;
            // n[0]=P2(N) n[2]=P4(E) n[4]=P6(S) n[6]=P8(W)
            if (!second) {
                if (n[0] * n[2] * n[4] != 0) continue;
                if (n[2] * n[4] * n[6] != 0) continue;
            } else {
                if (n[0] * n[2] * n[6] != 0) continue;
                if (n[0] * n[4] * n[6] != 0) continue;
            }
            doomed.push_back(static_cast<std::size_t>(r) * w + c);
        }
    }
    for (std::size_t idx : doomed) m.data[idx] = 0;
    return !doomed.empty();
}

int degree(const BinaryMask& m, int r, int c) {
    int d = 0;
    for (const auto& nb : kNeighbors) d += px(m, r + nb[0], c + nb[1]);
    return d;
}

} // namespace

BinaryMask zhang_suen_thin(const BinaryMask& shape) {
    BinaryMask out = shape;
    bool changed = true;
    while (changed) {
        changed = thin_subpass(out, false);
        changed = thin_subpass(out, true) || changed;
    }
    return out;
}

BinaryMask medial_axis(const BinaryMask& shape) {
    const GrayImage dt = distance_transform(shape);
    const int h = static_cast<int>(shape.height);
    const int w = static_cast<int>(shape.width);
    auto dt_at = [&](int r, int c) -> double {
        if (r < 0 || c < 0 || r >= h || c >= w) return 0.0;
        return dt.at(r, c);
    };
    constexpr std::array<std::array<int, 2>, 4> kDirs = {{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
    BinaryMask out(shape.width, shape.height);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!shape.at(r, c)) continue;
            const double v = dt.at(r, c);
            for (const auto& d : kDirs) {
                const double n1 = dt_at(r + d[0], c + d[1]);
                const double n2 = dt_at(r - d[0], c - d[1]);
                if (v >= n1 && v >= n2 && (v > n1 || v > n2)) {
                    out.set(r, c, true);
                    break;
                }
            }
        }
    }
    return out;
}

BinaryMask prune_spurs(const BinaryMask& skel, std::uint32_t max_len) {
    if (max_len == 0) return skel;
    BinaryMask out = skel;
    const int h = static_cast<int>(out.height);
    const int w = static_cast<int>(out.width);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::array<int, 2>> endpoints;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (out.at(r, c) && degree(out, r, c) == 1) endpoints.push_back({r, c});
            }
        }
        for (const auto& e : endpoints) {
            if (!out.at(e[0], e[1]) || degree(out, e[0], e[1]) != 1) continue;
            std::vector<std::array<int, 2>> branch;
            std::array<int, 2> prev = {-1, -1};
            std::array<int, 2> cur = e;
            bool doomed = false;
            for (;;) {
                branch.push_back(cur);
                if (branch.size() >= max_len) break; // long enough, keep
                std::array<int, 2> next = {-1, -1};
                bool have_next = false;
                for (const auto& nb : kNeighbors) {
                    const int nr = cur[0] + nb[0], nc = cur[1] + nb[1];
                    if (px(out, nr, nc) && !(nr == prev[0] && nc == prev[1])) {
                        next = {nr, nc};
                        have_next = true;
                        break;
                    }
                }
                if (!have_next) break; // isolated pixel
                const int ndeg = degree(out, next[0], next[1]);
                if (ndeg >= 3) {
                    doomed = true; // short branch hanging off a junction
                    break;
                }
                if (ndeg == 1) break; // other endpoint: whole skeleton is a path
                prev = cur;
                cur = next;
            }
            if (doomed) {
                for (const auto& p : branch) out.set(p[0], p[1], false);
                changed = true;
            }
        }
    }
    return out;
}

BinaryMask skeletonize(const BinaryMask& shape, const ThinningAlgo& algo) {
    BinaryMask skel = algo.variant == ThinningVariant::ZhangSuen ? zhang_suen_thin(shape)
                                                                 : medial_axis(shape);
    return prune_spurs(skel, algo.prune_length);
}

} // namespace skelbench
