#include "skelbench/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <utility>

#include "json.hpp"

#include "skelbench/png_io.hpp"
#include "skelbench/rng.hpp"

namespace skelbench {

namespace {

namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;
// keeps per-index rng streams out of the small-stream space other modules use
constexpr std::uint64_t kIndexStream = 0x67656e53686170ull;

void clear_border(BinaryMask& m, std::uint32_t margin) {
    for (std::uint32_t r = 0; r < m.height; ++r) {
        for (std::uint32_t c = 0; c < m.width; ++c) {
            if (r < margin || r + margin >= m.height || c < margin || c + margin >= m.width) {
                m.set(r, c, false);
            }
        }
    }
}

BinaryMask draw_ellipses(Rng& rng, std::uint32_t size, std::uint32_t margin) {
    BinaryMask m(size, size);
    const double s = size;
    const int k = rng.range(2, 4);
    const double c0y = rng.uniform(s * 0.35, s * 0.65);
    const double c0x = rng.uniform(s * 0.35, s * 0.65);
    for (int i = 0; i < k; ++i) {
        const double cy = i == 0 ? c0y : c0y + rng.uniform(-s * 0.18, s * 0.18);
        const double cx = i == 0 ? c0x : c0x + rng.uniform(-s * 0.18, s * 0.18);
        const double ry = rng.uniform(s * 0.08, s * 0.22);
        const double rx = rng.uniform(s * 0.08, s * 0.22);
        const double th = rng.uniform(0.0, kPi);
        const double ct = std::cos(th), st = std::sin(th);
        for (std::uint32_t r = 0; r < size; ++r) {
            for (std::uint32_t c = 0; c < size; ++c) {
                const double dy = r - cy, dx = c - cx;
                const double u = dx * ct + dy * st;
                const double v = -dx * st + dy * ct;
                if ((u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0) m.set(r, c, true);
            }
        }
    }
    clear_border(m, margin);
    return m;
}

BinaryMask draw_polygon(Rng& rng, std::uint32_t size, std::uint32_t margin) {
    const double s = size;
    const int n = rng.range(5, 10);
    const bool star = rng.uniform() < 0.5;
    const double cy = rng.uniform(s * 0.4, s * 0.6);
    const double cx = rng.uniform(s * 0.4, s * 0.6);
    const double outer = rng.uniform(s * 0.16, s * 0.32);
    const int verts = star ? 2 * n : n;
    std::vector<double> py(verts), px(verts);
    for (int i = 0; i < verts; ++i) {
        const double base = 2.0 * kPi * i / verts;
        const double ang = base + rng.uniform(-0.3, 0.3) * (2.0 * kPi / verts);
        double rad = outer * rng.uniform(0.7, 1.0);
        if (star && (i & 1)) rad *= rng.uniform(0.45, 0.75);
        py[i] = cy + rad * std::sin(ang);
        px[i] = cx + rad * std::cos(ang);
    }
    BinaryMask m(size, size);
    for (std::uint32_t r = 0; r < size; ++r) {
        for (std::uint32_t c = 0; c < size; ++c) {
            bool in = false;
            for (int i = 0, j = verts - 1; i < verts; j = i++) {
                if ((py[i] > r) != (py[j] > r) &&
                    c < (px[j] - px[i]) * (r - py[i]) / (py[j] - py[i]) + px[i]) {
                    in = !in;
                }
            }
            if (in) m.set(r, c, true);
        }
    }
    clear_border(m, margin);
    return m;
}

void stamp_disk(BinaryMask& m, double cy, double cx, double rad) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - rad)));
    const int r1 = std::min(static_cast<int>(m.height) - 1,
                            static_cast<int>(std::ceil(cy + rad)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - rad)));
    const int c1 = std::min(static_cast<int>(m.width) - 1,
                            static_cast<int>(std::ceil(cx + rad)));
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const double dy = r - cy, dx = c - cx;
            if (dy * dy + dx * dx <= rad * rad) m.set(r, c, true);
        }
    }
}

BinaryMask draw_walk(Rng& rng, std::uint32_t size, std::uint32_t margin) {
    const double s = size;
    BinaryMask m(size, size);
    const double rad = rng.uniform(std::max(2.0, s / 32.0), std::max(3.0, s / 16.0));
    // consecutive disk centers stay one step <= rad apart, so the band is connected
    const double lo = margin + rad + 1.0;
    const double hi = s - 1.0 - margin - rad - 1.0;
    double y = s * 0.5 + rng.uniform(-s * 0.1, s * 0.1);
    double x = s * 0.5 + rng.uniform(-s * 0.1, s * 0.1);
    double ang = rng.uniform(0.0, 2.0 * kPi);
    stamp_disk(m, y, x, rad);
    const int steps = rng.range(18, 36);
    for (int i = 0; i < steps; ++i) {
        ang += rng.uniform(-0.7, 0.7);
        y = std::clamp(y + rad * std::sin(ang), lo, hi);
        x = std::clamp(x + rad * std::cos(ang), lo, hi);
        stamp_disk(m, y, x, rad);
    }
    return m;
}

std::string stem_name(std::uint32_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04u", index);
    return buf;
}

std::vector<std::string> png_stems(const fs::path& dir, const char* what) {
    if (!fs::is_directory(dir)) {
        throw IoError(std::string(what) + " directory " + dir.string() + " does not exist");
    }
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".png") stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

} // namespace

std::vector<std::string> list_png_stems(const fs::path& dir) {
    return png_stems(dir, "listing");
}

void validate_dataset_spec(const DatasetSpec& spec) {
    if (spec.count < 1) throw InvalidConfig("dataset: count must be at least 1");
    if (spec.size < 16 || spec.size % 2 != 0) {
        throw InvalidConfig("dataset: size " + std::to_string(spec.size) +
                            " must be even and at least 16");
    }
    const double sum = spec.ellipse_ratio + spec.polygon_ratio + spec.walk_ratio;
    if (spec.ellipse_ratio < 0.0 || spec.polygon_ratio < 0.0 || spec.walk_ratio < 0.0 ||
        std::fabs(sum - 1.0) > 1e-9) {
        throw InvalidConfig("dataset: family ratios must be nonnegative and sum to 1");
    }
}

SamplePair gen_shape(const DatasetSpec& spec, std::uint32_t index) {
    validate_dataset_spec(spec);
    Rng rng(mix_seed(spec.seed, kIndexStream + index));
    const std::uint32_t margin = std::max(2u, spec.size / 16);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double u = rng.uniform();
        BinaryMask shape;
        if (u < spec.ellipse_ratio) {
            shape = draw_ellipses(rng, spec.size, margin);
        } else if (u < spec.ellipse_ratio + spec.polygon_ratio) {
            shape = draw_polygon(rng, spec.size, margin);
        } else {
            shape = draw_walk(rng, spec.size, margin);
        }
        if (shape.empty_mask()) continue;
        if (connected_components(shape).count != 1) continue;
        BinaryMask skel = skeletonize(shape, spec.gt);
        if (skel.empty_mask()) continue;
        return {std::move(shape), std::move(skel)};
    }
    throw GenerationFailure("gen_shape: no valid draw for index " + std::to_string(index) +
                            " after 64 attempts");
}

DatasetManifest gen_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
    validate_dataset_spec(spec);
    std::error_code ec;
    fs::create_directories(out_dir / "img", ec);
    fs::create_directories(out_dir / "gt", ec);
    if (ec) throw IoError("gen_dataset: cannot create " + out_dir.string());

    DatasetManifest manifest{spec, {}};
    nlohmann::json files = nlohmann::json::array();
    for (std::uint32_t i = 0; i < spec.count; ++i) {
        const SamplePair pair = gen_shape(spec, i);
        const std::string stem = stem_name(i);
        save_png(pair.shape, out_dir / "img" / (stem + ".png"));
        save_png(pair.skeleton, out_dir / "gt" / (stem + ".png"));
        manifest.stems.push_back(stem);
        files.push_back({{"stem", stem},
                         {"img", "img/" + stem + ".png"},
                         {"gt", "gt/" + stem + ".png"}});
    }

    const nlohmann::json j = {
        {"spec",
         {{"count", spec.count},
          {"size", spec.size},
          {"seed", spec.seed},
          {"mix", {spec.ellipse_ratio, spec.polygon_ratio, spec.walk_ratio}},
          {"gt",
           {{"variant",
             spec.gt.variant == ThinningVariant::ZhangSuen ? "zhang-suen" : "medial-axis"},
            {"prune", spec.gt.prune_length}}}}},
        {"files", files},
    };
    std::ofstream f(out_dir / "manifest.json", std::ios::trunc);
    if (!f) throw IoError("gen_dataset: cannot write manifest in " + out_dir.string());
    f << j.dump(2) << '\n';
    return manifest;
}

std::vector<SamplePair> ingest_dir(const fs::path& img_dir, const fs::path& gt_dir) {
    const std::vector<std::string> stems = png_stems(img_dir, "ingest: image");
    if (stems.empty()) throw EmptyDirectory("ingest: no PNG files in " + img_dir.string());

    const bool with_gt = !gt_dir.empty();
    if (with_gt) {
        const std::vector<std::string> gt_list = png_stems(gt_dir, "ingest: ground-truth");
        const std::set<std::string> img_set(stems.begin(), stems.end());
        const std::set<std::string> gt_set(gt_list.begin(), gt_list.end());
        for (const std::string& stem : stems) {
            if (!gt_set.count(stem)) {
                throw MissingPair("ingest: no ground truth for stem '" + stem + "'");
            }
        }
        for (const std::string& stem : gt_list) {
            if (!img_set.count(stem)) {
                throw MissingPair("ingest: no image for stem '" + stem + "'");
            }
        }
    }

    std::vector<SamplePair> pairs;
    pairs.reserve(stems.size());
    for (const std::string& stem : stems) {
        SamplePair pair;
        pair.shape = load_png(img_dir / (stem + ".png"));
        if (with_gt) {
            pair.skeleton = load_png(gt_dir / (stem + ".png"));
            if (pair.skeleton.width != pair.shape.width ||
                pair.skeleton.height != pair.shape.height) {
                throw DimensionMismatch(
                    "ingest: stem '" + stem + "': " + std::to_string(pair.shape.width) +
                    "x" + std::to_string(pair.shape.height) + " image vs " +
                    std::to_string(pair.skeleton.width) + "x" +
                    std::to_string(pair.skeleton.height) + " ground truth");
            }
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

SplitResult split_dataset(const std::vector<SamplePair>& pairs, double train_fraction,
                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidConfig("split: train fraction must be inside (0, 1)");
    }
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pairs.size())));
    if (n_train == 0 || n_train >= pairs.size()) {
        throw DegenerateSplit("split: " + std::to_string(n_train) + " of " +
                              std::to_string(pairs.size()) + " pairs on the training side");
    }
    SplitResult out;
    out.train.reserve(n_train);
    out.holdout.reserve(pairs.size() - n_train);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        (i < n_train ? out.train : out.holdout).push_back(pairs[idx[i]]);
    }
    return out;
}

} // namespace skelbench
