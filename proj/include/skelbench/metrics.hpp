#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "skelbench/image.hpp"

namespace skelbench {

struct MatchConfig {
    int search_radius = 64;            // max |dx|, |dy| explored
    double min_overlap_fraction = 0.25; // of image area, for an offset to count

    static MatchConfig for_size(std::uint32_t width, std::uint32_t height) {
        MatchConfig cfg;
        cfg.search_radius = static_cast<int>(std::max(width, height) / 4);
        return cfg;
    }
};

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct MetricReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double max_zncc = 0.0;       // best correlation over the offset search
    double center_distance = 0.0; // D: distance between bounding-box centers
    double m_ccorr = 0.0;
    bool degenerate = false;      // empty prediction and/or empty truth
};

struct ZnccResult {
    double value = 0.0;
    bool rejected = false; // overlap below min_overlap_fraction
};

struct MaxZnccResult {
    double value = 0.0;
    int dx = 0, dy = 0;
};

ConfusionCounts confusion_counts(const BinaryMask& truth, const BinaryMask& pred);

// Harmonic mean of precision and recall; 0 when both are 0. Both masks empty
// gives 1 (the degenerate convention; evaluate_pair raises the flag).
double f1_score(const BinaryMask& truth, const BinaryMask& pred);

// Pearson correlation between the truth window and pred translated by
// (dx, dy), over the overlap region, masks taken as 0/1 values. Windows with
// zero variance score 0. All sums are integer counts, so two implementations
// of this definition agree bit-for-bit.
ZnccResult zncc_at_offset(const BinaryMask& truth, const BinaryMask& pred,
                          int dx, int dy, const MatchConfig& cfg);

// Maximum of zncc_at_offset over (dx, dy) in [-R, R]^2, skipping rejected
// offsets. Ties prefer the smallest offset norm, then smallest dy, then dx.
// Throws AllRejected when the config excludes every offset.
MaxZnccResult max_zncc(const BinaryMask& truth, const BinaryMask& pred,
                       const MatchConfig& cfg);

// Euclidean distance between the real-valued bounding-box centers.
double bbox_center_distance(const BinaryMask& truth, const BinaryMask& pred);

// max(0, max_zncc) / log2(D + 2), with the degenerate conventions:
// both masks empty -> 1, exactly one side empty -> 0.
double m_ccorr(const BinaryMask& truth, const BinaryMask& pred, const MatchConfig& cfg);

MetricReport evaluate_pair(const BinaryMask& truth, const BinaryMask& pred,
                           const MatchConfig& cfg);

// Order-preserving; pairs are scored in parallel.
std::vector<MetricReport> evaluate_batch(const std::vector<BinaryMask>& truths,
                                         const std::vector<BinaryMask>& preds,
                                         const MatchConfig& cfg);

} // namespace skelbench
