#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "skelbench/errors.hpp"
#include "skelbench/image.hpp"
#include "skelbench/metrics.hpp"
#include "skelbench/rng.hpp"

#include "test_util.hpp"

using namespace skelbench;

namespace {

// Plain-loop Pearson correlation over the overlap window, written without the
// integral-image machinery. Sums are integers, so this and the library
// formula agree exactly, not just approximately.
struct RefZncc {
    double value = 0.0;
    bool rejected = false;
};

RefZncc ref_zncc(const BinaryMask& truth, const BinaryMask& pred, int dx, int dy,
                 const MatchConfig& cfg) {
    const int h = static_cast<int>(truth.height), w = static_cast<int>(truth.width);
    std::int64_t n = 0, sa = 0, sb = 0, sab = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int pr = r - dy, pc = c - dx;
            if (pr < 0 || pr >= h || pc < 0 || pc >= w) continue;
            const std::int64_t a = truth.at(r, c) ? 1 : 0;
            const std::int64_t b = pred.at(pr, pc) ? 1 : 0;
            ++n;
            sa += a;
            sb += b;
            sab += a * b;
        }
    }
    RefZncc out;
    const double area = double(w) * double(h);
    if (double(n) < cfg.min_overlap_fraction * area) {
        out.rejected = true;
        return out;
    }
    const std::int64_t num = n * sab - sa * sb;
    const std::int64_t va = n * sa - sa * sa;
    const std::int64_t vb = n * sb - sb * sb;
    if (va == 0 || vb == 0) return out;
    if (va == vb && num == va) {
        out.value = 1.0;
        return out;
    }
    if (va == vb && num == -va) {
        out.value = -1.0;
        return out;
    }
    out.value = double(num) / std::sqrt(double(va) * double(vb));
    return out;
}

RefZncc ref_max_zncc(const BinaryMask& truth, const BinaryMask& pred,
                     const MatchConfig& cfg, int* best_dx = nullptr,
                     int* best_dy = nullptr) {
    bool found = false;
    double best = 0.0;
    int bdx = 0, bdy = 0;
    const int R = cfg.search_radius;
    for (int dy = -R; dy <= R; ++dy) {
        for (int dx = -R; dx <= R; ++dx) {
            const RefZncc z = ref_zncc(truth, pred, dx, dy, cfg);
            if (z.rejected) continue;
            const long norm = long(dx) * dx + long(dy) * dy;
            const long bnorm = long(bdx) * bdx + long(bdy) * bdy;
            const bool better =
                !found || z.value > best ||
                (z.value == best &&
                 (norm < bnorm || (norm == bnorm && (dy < bdy || (dy == bdy && dx < bdx)))));
            if (better) {
                found = true;
                best = z.value;
                bdx = dx;
                bdy = dy;
            }
        }
    }
    RefZncc out;
    out.rejected = !found;
    out.value = best;
    if (best_dx) *best_dx = bdx;
    if (best_dy) *best_dy = bdy;
    return out;
}

} // namespace

TEST_CASE("confusion_counts on a hand-built pair") {
    BinaryMask truth(4, 4), pred(4, 4);
    truth.set(0, 0, true);
    truth.set(1, 1, true);
    truth.set(2, 2, true);
    pred.set(1, 1, true);
    pred.set(2, 2, true);
    pred.set(3, 3, true);
    const ConfusionCounts cc = confusion_counts(truth, pred);
    CHECK(cc.tp == 2);
    CHECK(cc.fp == 1);
    CHECK(cc.fn == 1);
    CHECK(cc.tn == 12);
    CHECK(cc.tp + cc.fp + cc.fn + cc.tn == 16);
}

TEST_CASE("confusion_counts of a mask against its complement") {
    Rng rng(13);
    const BinaryMask m = testutil::random_noise_mask(rng, 12, 12);
    BinaryMask inv = m;
    for (auto& v : inv.data) v = v ? 0 : 1;
    const ConfusionCounts cc = confusion_counts(m, inv);
    CHECK(cc.tp == 0);
    CHECK(cc.tn == 0);
    CHECK(cc.fp + cc.fn == m.pixel_count());
}

TEST_CASE("confusion_counts rejects mismatched dimensions") {
    CHECK_THROWS_AS(confusion_counts(BinaryMask(4, 4), BinaryMask(4, 5)),
                    DimensionMismatch);
}

TEST_CASE("f1 from a 10-pixel truth with 6 overlapping and 2 extra") {
    BinaryMask truth(8, 8), pred(8, 8);
    for (int c = 0; c < 10; ++c) truth.set(c / 8, c % 8, true);
    for (int c = 0; c < 6; ++c) pred.set(c / 8, c % 8, true); // 6 shared
    pred.set(5, 5, true);
    pred.set(6, 6, true); // 2 extra
    const ConfusionCounts cc = confusion_counts(truth, pred);
    CHECK(cc.tp == 6);
    CHECK(cc.fp == 2);
    CHECK(cc.fn == 4);
    const MetricReport r = evaluate_pair(truth, pred, MatchConfig{});
    CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(std::fabs(r.f1 - 2.0 * 0.75 * 0.6 / 1.35) <= 1e-9);
}

TEST_CASE("f1_score identities and hand values") {
    Rng rng(11);
    const BinaryMask m = testutil::random_blob(rng, 32);
    CHECK(f1_score(m, m) == 1.0);
    CHECK(f1_score(BinaryMask(8, 8), BinaryMask(8, 8)) == 1.0);
    CHECK(f1_score(m, BinaryMask(32, 32)) == 0.0);
    CHECK(f1_score(BinaryMask(32, 32), m) == 0.0);

    // tp=2, fp=1, fn=1: precision 2/3, recall 2/3, f1 2/3
    BinaryMask truth(4, 4), pred(4, 4);
    truth.set(0, 0, true);
    truth.set(1, 1, true);
    truth.set(2, 2, true);
    pred.set(1, 1, true);
    pred.set(2, 2, true);
    pred.set(3, 3, true);
    CHECK(f1_score(truth, pred) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("f1 collapses to zero under 2-pixel shifts of thin skeletons") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const BinaryMask skel = testutil::staircase_skeleton(rng, 64, 12);
        for (const auto [dx, dy] : {std::pair{2, 0}, std::pair{0, 2}, std::pair{3, 4}}) {
            CHECK(f1_score(skel, shift_mask(skel, dx, dy)) == 0.0);
        }
    }
}

TEST_CASE("zncc_at_offset equals the plain-loop formula exactly") {
    MatchConfig cfg;
    cfg.search_radius = 8;
    cfg.min_overlap_fraction = 0.25;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const std::uint32_t w = 8 + static_cast<std::uint32_t>(rng.index(25));
        const std::uint32_t h = 8 + static_cast<std::uint32_t>(rng.index(25));
        const BinaryMask a = testutil::random_noise_mask(rng, w, h, rng.uniform(0.05, 0.9));
        const BinaryMask b = testutil::random_noise_mask(rng, w, h, rng.uniform(0.05, 0.9));
        for (int k = 0; k < 20; ++k) {
            const int dx = rng.range(-8, 8), dy = rng.range(-8, 8);
            const ZnccResult got = zncc_at_offset(a, b, dx, dy, cfg);
            const RefZncc want = ref_zncc(a, b, dx, dy, cfg);
            CHECK(got.rejected == want.rejected);
            CHECK(got.value == want.value); // exact, both use integer sums
        }
    }
}

TEST_CASE("zncc_at_offset of a mask against itself at zero offset is one") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng rng(40 + seed);
        const BinaryMask m = testutil::random_blob(rng, 48);
        CHECK(zncc_at_offset(m, m, 0, 0, MatchConfig{}).value == 1.0);
    }
}

TEST_CASE("zncc_at_offset of a mask against its complement is minus one") {
    Rng rng(17);
    const BinaryMask m = testutil::random_noise_mask(rng, 16, 16);
    BinaryMask inv = m;
    for (auto& v : inv.data) v = v ? 0 : 1;
    CHECK(zncc_at_offset(m, inv, 0, 0, MatchConfig{}).value == -1.0);
}

TEST_CASE("zncc_at_offset zero-variance windows score zero") {
    MatchConfig cfg;
    const BinaryMask flat(16, 16);
    Rng rng(3);
    const BinaryMask m = testutil::random_noise_mask(rng, 16, 16);
    CHECK(zncc_at_offset(flat, m, 0, 0, cfg).value == 0.0);
    CHECK(zncc_at_offset(m, flat, 0, 0, cfg).value == 0.0);

    BinaryMask full(16, 16);
    std::fill(full.data.begin(), full.data.end(), 1);
    CHECK(zncc_at_offset(full, m, 0, 0, cfg).value == 0.0);
}

TEST_CASE("zncc_at_offset rejects offsets with too little overlap") {
    MatchConfig cfg;
    cfg.min_overlap_fraction = 0.5;
    Rng rng(5);
    const BinaryMask a = testutil::random_noise_mask(rng, 16, 16);
    const BinaryMask b = testutil::random_noise_mask(rng, 16, 16);
    // 8-column shift leaves a 16x8 overlap: exactly half the area, accepted
    CHECK_FALSE(zncc_at_offset(a, b, 8, 0, cfg).rejected);
    CHECK(zncc_at_offset(a, b, 9, 0, cfg).rejected);
    CHECK(zncc_at_offset(a, b, 8, 1, cfg).rejected);
}

TEST_CASE("max_zncc equals the exhaustive brute-force scan") {
    MatchConfig cfg;
    cfg.search_radius = 8;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const std::uint32_t w = 8 + static_cast<std::uint32_t>(rng.index(25));
        const std::uint32_t h = 8 + static_cast<std::uint32_t>(rng.index(25));
        const BinaryMask a = testutil::random_noise_mask(rng, w, h, rng.uniform(0.02, 0.6));
        const BinaryMask b = testutil::random_noise_mask(rng, w, h, rng.uniform(0.02, 0.6));
        int want_dx = 0, want_dy = 0;
        const RefZncc want = ref_max_zncc(a, b, cfg, &want_dx, &want_dy);
        REQUIRE_FALSE(want.rejected);
        const MaxZnccResult got = max_zncc(a, b, cfg);
        CHECK(got.value == want.value);
        CHECK(got.dx == want_dx);
        CHECK(got.dy == want_dy);
    }
}

TEST_CASE("max_zncc recovers a pure translation by aligning back") {
    Rng rng(99);
    const BinaryMask m = testutil::random_blob(rng, 64, 16);
    const MaxZnccResult hit = max_zncc(m, shift_mask(m, 5, -3), MatchConfig{});
    CHECK(hit.value == 1.0);
    CHECK(hit.dx == -5);
    CHECK(hit.dy == 3);

    const MaxZnccResult self = max_zncc(m, m, MatchConfig{});
    CHECK(self.value == 1.0);
    CHECK(self.dx == 0);
    CHECK(self.dy == 0);
}

TEST_CASE("max_zncc of an empty prediction is zero") {
    Rng rng(101);
    const BinaryMask m = testutil::random_blob(rng, 32);
    const MaxZnccResult r = max_zncc(m, BinaryMask(32, 32), MatchConfig{});
    CHECK(r.value == 0.0);
}

TEST_CASE("max_zncc throws when every offset is rejected") {
    MatchConfig cfg;
    cfg.search_radius = 2;
    cfg.min_overlap_fraction = 1.5; // unreachable: overlap never exceeds the area
    Rng rng(1);
    const BinaryMask m = testutil::random_noise_mask(rng, 8, 8);
    CHECK_THROWS_AS(max_zncc(m, m, cfg), AllRejected);
}

TEST_CASE("MatchConfig validation") {
    MatchConfig bad;
    bad.search_radius = -1;
    Rng rng(2);
    const BinaryMask m = testutil::random_noise_mask(rng, 8, 8);
    CHECK_THROWS_AS(max_zncc(m, m, bad), InvalidConfig);
    bad = MatchConfig{};
    bad.min_overlap_fraction = 0.0;
    CHECK_THROWS_AS(max_zncc(m, m, bad), InvalidConfig);
    CHECK(MatchConfig::for_size(256, 256).search_radius == 64);
}

TEST_CASE("bbox_center_distance hand cases") {
    BinaryMask a(16, 16), b(16, 16);
    a.set(4, 4, true);
    b.set(4, 7, true);
    CHECK(bbox_center_distance(a, b) == 3.0);
    b.set(8, 7, true); // b bbox center now (6.0, 7.0)
    CHECK(bbox_center_distance(a, b) == doctest::Approx(std::sqrt(13.0)).epsilon(1e-15));
    CHECK_THROWS_AS(bbox_center_distance(a, BinaryMask(16, 16)), EmptyMaskError);

    BinaryMask p(8, 8), q(8, 8);
    p.set(0, 0, true);
    q.set(0, 7, true);
    CHECK(bbox_center_distance(p, q) == 7.0);
}

TEST_CASE("bbox_center_distance of a shifted mask is the shift norm") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const BinaryMask m = testutil::random_blob(rng, 64, 12);
        const int dx = rng.range(-6, 6), dy = rng.range(-6, 6);
        CHECK(std::fabs(bbox_center_distance(m, shift_mask(m, dx, dy)) -
                        std::sqrt(double(dx) * dx + double(dy) * dy)) <= 1e-12);
    }
}

TEST_CASE("m_ccorr identity and closed-form shift law") {
    MatchConfig cfg;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        const BinaryMask m = testutil::random_blob(rng, 96, 24);
        CHECK(m_ccorr(m, m, cfg) == 1.0);
        for (const auto [dx, dy] :
             {std::pair{1, 0}, std::pair{0, 2}, std::pair{3, 4}, std::pair{6, 8}}) {
            const double d = std::sqrt(double(dx) * dx + double(dy) * dy);
            const double want = 1.0 / std::log2(d + 2.0);
            CHECK(std::fabs(m_ccorr(m, shift_mask(m, dx, dy), cfg) - want) <= 1e-9);
        }
    }
}

TEST_CASE("m_ccorr monotone in axis shift magnitude") {
    Rng rng(321);
    const BinaryMask m = testutil::random_blob(rng, 96, 30);
    MatchConfig cfg;
    double prev = 2.0;
    for (int s = 0; s <= 12; ++s) {
        const double v = m_ccorr(m, shift_mask(m, s, 0), cfg);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("m_ccorr is bounded by max(0, max_zncc)") {
    MatchConfig cfg;
    cfg.search_radius = 8;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(700 + seed);
        const BinaryMask a = testutil::random_noise_mask(rng, 24, 24, rng.uniform(0.05, 0.5));
        const BinaryMask b = testutil::random_noise_mask(rng, 24, 24, rng.uniform(0.05, 0.5));
        const double v = m_ccorr(a, b, cfg);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v <= std::max(0.0, max_zncc(a, b, cfg).value) + 1e-15);
    }
}

TEST_CASE("evaluate_pair degenerate conventions") {
    Rng rng(8);
    const BinaryMask m = testutil::random_blob(rng, 32);
    const BinaryMask empty(32, 32);
    MatchConfig cfg;

    const MetricReport both = evaluate_pair(empty, empty, cfg);
    CHECK(both.degenerate);
    CHECK(both.f1 == 1.0);
    CHECK(both.m_ccorr == 1.0);
    CHECK(both.center_distance == 0.0);

    const MetricReport pred_empty = evaluate_pair(m, empty, cfg);
    CHECK(pred_empty.degenerate);
    CHECK(pred_empty.f1 == 0.0);
    CHECK(pred_empty.m_ccorr == 0.0);
    CHECK(pred_empty.max_zncc == 0.0);
    CHECK(pred_empty.center_distance == 0.0);

    const MetricReport truth_empty = evaluate_pair(empty, m, cfg);
    CHECK(truth_empty.degenerate);
    CHECK(truth_empty.f1 == 0.0);
    CHECK(truth_empty.m_ccorr == 0.0);
}

TEST_CASE("evaluate_pair against component metrics") {
    MatchConfig cfg;
    cfg.search_radius = 6;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(900 + seed);
        const BinaryMask truth = testutil::random_blob(rng, 48);
        const BinaryMask pred = shift_mask(truth, rng.range(-3, 3), rng.range(-3, 3));
        const MetricReport r = evaluate_pair(truth, pred, cfg);
        CHECK_FALSE(r.degenerate);
        CHECK(r.f1 == f1_score(truth, pred));
        CHECK(r.max_zncc == max_zncc(truth, pred, cfg).value);
        CHECK(r.center_distance == bbox_center_distance(truth, pred));
        CHECK(r.m_ccorr == m_ccorr(truth, pred, cfg));
        CHECK(r.precision >= 0.0);
        CHECK(r.precision <= 1.0);
        CHECK(r.recall >= 0.0);
        CHECK(r.recall <= 1.0);
        if (r.max_zncc > 0.0) {
            CHECK(std::fabs(r.m_ccorr -
                            r.max_zncc / std::log2(r.center_distance + 2.0)) <= 1e-12);
        }
    }
}

TEST_CASE("evaluate_batch preserves order and matches evaluate_pair") {
    MatchConfig cfg;
    cfg.search_radius = 6;
    std::vector<BinaryMask> truths, preds;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        Rng rng(50 + seed);
        truths.push_back(testutil::random_blob(rng, 40));
        preds.push_back(seed % 4 == 3 ? BinaryMask(40, 40)
                                      : shift_mask(truths.back(), rng.range(-2, 2),
                                                   rng.range(-2, 2)));
    }
    const std::vector<MetricReport> batch = evaluate_batch(truths, preds, cfg);
    REQUIRE(batch.size() == truths.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const MetricReport single = evaluate_pair(truths[i], preds[i], cfg);
        CHECK(batch[i].f1 == single.f1);
        CHECK(batch[i].m_ccorr == single.m_ccorr);
        CHECK(batch[i].max_zncc == single.max_zncc);
        CHECK(batch[i].degenerate == single.degenerate);
    }
    CHECK_THROWS_AS(evaluate_batch(truths, std::vector<BinaryMask>(3, BinaryMask(40, 40)), cfg),
                    DimensionMismatch);
}
