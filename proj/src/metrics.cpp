#include "skelbench/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "skelbench/parallel.hpp"

namespace skelbench {

namespace {

void check_dims(const BinaryMask& truth, const BinaryMask& pred, const char* op) {
    if (truth.width != pred.width || truth.height != pred.height) {
        throw DimensionMismatch(std::string(op) + ": truth is " + std::to_string(truth.width) +
                                "x" + std::to_string(truth.height) + ", pred is " +
                                std::to_string(pred.width) + "x" + std::to_string(pred.height));
    }
}

void check_match_config(const MatchConfig& cfg) {
    if (cfg.search_radius < 0) throw InvalidConfig("MatchConfig: search_radius must be >= 0");
    if (!(cfg.min_overlap_fraction > 0.0)) {
        throw InvalidConfig("MatchConfig: min_overlap_fraction must be > 0");
    }
}

struct Window {
    int r0, r1, c0, c1; // truth coords, half-open
    std::int64_t area() const {
        return static_cast<std::int64_t>(r1 - r0) * (c1 - c0);
    }
};

// Overlap of pred translated by (dx, dy) with the truth frame.
Window overlap_window(const BinaryMask& truth, int dx, int dy) {
    const int h = static_cast<int>(truth.height);
    const int w = static_cast<int>(truth.width);
    Window win;
    win.r0 = std::max(0, dy);
    win.r1 = h + std::min(0, dy);
    win.c0 = std::max(0, dx);
    win.c1 = w + std::min(0, dx);
    if (win.r1 < win.r0) win.r1 = win.r0;
    if (win.c1 < win.c0) win.c1 = win.c0;
    return win;
}

// Pearson coefficient of two 0/1 windows from their exact integer sums:
// corr = (n*sab - sa*sb) / sqrt((n*sa - sa^2) * (n*sb - sb^2)).
// For 0/1 data sum(a^2) = sum(a), so the variance terms stay integral. The
// identity/complement shortcuts keep perfectly (anti)correlated windows at
// exactly +/-1 regardless of window size.
double zncc_from_counts(std::int64_t n, std::int64_t sa, std::int64_t sb, std::int64_t sab) {
    const std::int64_t var_a = n * sa - sa * sa;
    const std::int64_t var_b = n * sb - sb * sb;
    if (var_a == 0 || var_b == 0) return 0.0;
    const std::int64_t num = n * sab - sa * sb;
    if (var_a == var_b) {
        if (num == var_a) return 1.0;
        if (num == -var_a) return -1.0;
    }
    return static_cast<double>(num) /
           std::sqrt(static_cast<double>(var_a) * static_cast<double>(var_b));
}

// Inclusive-exclusive integral image: sums are over [r0,r1) x [c0,c1).
struct IntegralImage {
    std::uint32_t width = 0, height = 0;
    std::vector<std::int64_t> table;

    explicit IntegralImage(const BinaryMask& m) : width(m.width), height(m.height) {
        table.assign(static_cast<std::size_t>(width + 1) * (height + 1), 0);
        const std::size_t stride = width + 1;
        for (std::uint32_t r = 0; r < height; ++r) {
            std::int64_t row_sum = 0;
            for (std::uint32_t c = 0; c < width; ++c) {
                row_sum += m.at(r, c) ? 1 : 0;
                table[(r + 1) * stride + (c + 1)] = table[r * stride + (c + 1)] + row_sum;
            }
        }
    }

    std::int64_t sum(int r0, int r1, int c0, int c1) const {
        const std::size_t stride = width + 1;
        return table[static_cast<std::size_t>(r1) * stride + c1] -
               table[static_cast<std::size_t>(r0) * stride + c1] -
               table[static_cast<std::size_t>(r1) * stride + c0] +
               table[static_cast<std::size_t>(r0) * stride + c0];
    }
};

std::vector<std::array<int, 2>> foreground_pixels(const BinaryMask& m) {
    std::vector<std::array<int, 2>> fg;
    for (int r = 0; r < static_cast<int>(m.height); ++r) {
        for (int c = 0; c < static_cast<int>(m.width); ++c) {
            if (m.at(r, c)) fg.push_back({r, c});
        }
    }
    return fg;
}

} // namespace

ConfusionCounts confusion_counts(const BinaryMask& truth, const BinaryMask& pred) {
    check_dims(truth, pred, "confusion_counts");
    ConfusionCounts counts;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        const bool t = truth.data[i] != 0;
        const bool p = pred.data[i] != 0;
        if (t && p) ++counts.tp;
        else if (!t && p) ++counts.fp;
        else if (t && !p) ++counts.fn;
        else ++counts.tn;
    }
    return counts;
}

namespace {

double f1_from_counts(const ConfusionCounts& counts, bool both_empty) {
    if (both_empty) return 1.0;
    const double precision =
        counts.tp + counts.fp > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fp) : 0.0;
    const double recall =
        counts.tp + counts.fn > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

} // namespace

double f1_score(const BinaryMask& truth, const BinaryMask& pred) {
    const ConfusionCounts counts = confusion_counts(truth, pred);
    return f1_from_counts(counts, truth.empty_mask() && pred.empty_mask());
}

ZnccResult zncc_at_offset(const BinaryMask& truth, const BinaryMask& pred,
                          int dx, int dy, const MatchConfig& cfg) {
    check_dims(truth, pred, "zncc_at_offset");
    check_match_config(cfg);
    const Window win = overlap_window(truth, dx, dy);
    const std::int64_t n = win.area();
    const double min_area =
        cfg.min_overlap_fraction * static_cast<double>(truth.width) * truth.height;
    if (static_cast<double>(n) < min_area) return {0.0, true};

    std::int64_t sa = 0, sb = 0, sab = 0;
    for (int r = win.r0; r < win.r1; ++r) {
        for (int c = win.c0; c < win.c1; ++c) {
            const int a = truth.at(r, c) ? 1 : 0;
            const int b = pred.at(r - dy, c - dx) ? 1 : 0;
            sa += a;
            sb += b;
            sab += a * b;
        }
    }
    return {zncc_from_counts(n, sa, sb, sab), false};
}

MaxZnccResult max_zncc(const BinaryMask& truth, const BinaryMask& pred,
                       const MatchConfig& cfg) {
    check_dims(truth, pred, "max_zncc");
    check_match_config(cfg);

    const IntegralImage truth_ii(truth);
    const IntegralImage pred_ii(pred);
    const auto truth_fg = foreground_pixels(truth);
    const auto pred_fg = foreground_pixels(pred);
    const bool scan_pred = pred_fg.size() <= truth_fg.size();
    const auto& fg = scan_pred ? pred_fg : truth_fg;
    const BinaryMask& other = scan_pred ? truth : pred;

    const int h = static_cast<int>(truth.height);
    const int w = static_cast<int>(truth.width);
    const double min_area = cfg.min_overlap_fraction * static_cast<double>(w) * h;
    const int radius = cfg.search_radius;

    bool any = false;
    double best = 0.0;
    std::int64_t best_norm2 = 0;
    int best_dx = 0, best_dy = 0;

    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            const Window win = overlap_window(truth, dx, dy);
            const std::int64_t n = win.area();
            if (static_cast<double>(n) < min_area) continue;
            const std::int64_t sa = truth_ii.sum(win.r0, win.r1, win.c0, win.c1);
            const std::int64_t sb =
                pred_ii.sum(win.r0 - dy, win.r1 - dy, win.c0 - dx, win.c1 - dx);
            std::int64_t sab = 0;
            if (scan_pred) {
                // pred pixel (r, c) lands on truth pixel (r + dy, c + dx)
                for (const auto& p : fg) {
                    const int tr = p[0] + dy, tc = p[1] + dx;
                    if (tr >= 0 && tr < h && tc >= 0 && tc < w && other.at(tr, tc)) ++sab;
                }
            } else {
                for (const auto& p : fg) {
                    const int pr = p[0] - dy, pc = p[1] - dx;
                    if (pr >= 0 && pr < h && pc >= 0 && pc < w && other.at(pr, pc)) ++sab;
                }
            }
            const double value = zncc_from_counts(n, sa, sb, sab);
            const std::int64_t norm2 =
                static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy;
            const bool better =
                !any || value > best ||
                (value == best &&
                 (norm2 < best_norm2 ||
                  (norm2 == best_norm2 && (dy < best_dy || (dy == best_dy && dx < best_dx)))));
            if (better) {
                any = true;
                best = value;
                best_norm2 = norm2;
                best_dx = dx;
                best_dy = dy;
            }
        }
    }
    if (!any) throw AllRejected("max_zncc: every offset fell below min_overlap_fraction");
    return {best, best_dx, best_dy};
}

double bbox_center_distance(const BinaryMask& truth, const BinaryMask& pred) {
    const BBox tb = bounding_box(truth);
    const BBox pb = bounding_box(pred);
    const double dr = tb.center_row() - pb.center_row();
    const double dc = tb.center_col() - pb.center_col();
    return std::sqrt(dr * dr + dc * dc);
}

double m_ccorr(const BinaryMask& truth, const BinaryMask& pred, const MatchConfig& cfg) {
    return evaluate_pair(truth, pred, cfg).m_ccorr;
}

MetricReport evaluate_pair(const BinaryMask& truth, const BinaryMask& pred,
                           const MatchConfig& cfg) {
    check_dims(truth, pred, "evaluate_pair");
    check_match_config(cfg);

    const ConfusionCounts counts = confusion_counts(truth, pred);
    const bool truth_empty = counts.tp + counts.fn == 0;
    const bool pred_empty = counts.tp + counts.fp == 0;

    MetricReport report;
    report.precision =
        counts.tp + counts.fp > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fp) : 0.0;
    report.recall =
        counts.tp + counts.fn > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fn) : 0.0;
    report.f1 = f1_from_counts(counts, truth_empty && pred_empty);

    if (truth_empty || pred_empty) {
        report.degenerate = true;
        report.max_zncc = 0.0;
        report.center_distance = 0.0;
        report.m_ccorr = truth_empty && pred_empty ? 1.0 : 0.0;
        return report;
    }

    const MaxZnccResult mz = max_zncc(truth, pred, cfg);
    report.max_zncc = mz.value;
    report.center_distance = bbox_center_distance(truth, pred);
    report.m_ccorr = std::max(0.0, mz.value) / std::log2(report.center_distance + 2.0);
    return report;
}

std::vector<MetricReport> evaluate_batch(const std::vector<BinaryMask>& truths,
                                         const std::vector<BinaryMask>& preds,
                                         const MatchConfig& cfg) {
    if (truths.size() != preds.size()) {
        throw DimensionMismatch("evaluate_batch: got " + std::to_string(truths.size()) +
                                " truth masks and " + std::to_string(preds.size()) + " predictions");
    }
    std::vector<MetricReport> reports(truths.size());
    parallel_for(truths.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            reports[i] = evaluate_pair(truths[i], preds[i], cfg);
        }
    });
    return reports;
}

} // namespace skelbench
