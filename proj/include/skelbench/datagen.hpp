#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skelbench/image.hpp"
#include "skelbench/thinning.hpp"

namespace skelbench {

// Family mix ratios must be nonnegative and sum to 1.
struct DatasetSpec {
    std::uint32_t count = 1;
    std::uint32_t size = 64;
    std::uint64_t seed = 0;
    double ellipse_ratio = 0.4;
    double polygon_ratio = 0.4;
    double walk_ratio = 0.2;
    ThinningAlgo gt{ThinningVariant::ZhangSuen, 8};
};

void validate_dataset_spec(const DatasetSpec& spec);

struct SamplePair {
    BinaryMask shape;
    BinaryMask skeleton; // zero-sized when ingested without ground truth

    bool operator==(const SamplePair&) const = default;
};

// Deterministic in (spec.seed, index). The shape is one 8-connected component
// clear of the border; the skeleton is the configured thinning of it.
SamplePair gen_shape(const DatasetSpec& spec, std::uint32_t index);

struct DatasetManifest {
    DatasetSpec spec;
    std::vector<std::string> stems;
};

// Writes out_dir/img/NNNN.png, out_dir/gt/NNNN.png, and out_dir/manifest.json.
DatasetManifest gen_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// Sorted stems of the PNG files directly inside dir.
std::vector<std::string> list_png_stems(const std::filesystem::path& dir);

// Pairs img/gt files by stem in sorted order. An empty gt_dir ingests shapes
// only, leaving each skeleton zero-sized.
std::vector<SamplePair> ingest_dir(const std::filesystem::path& img_dir,
                                   const std::filesystem::path& gt_dir = {});

struct SplitResult {
    std::vector<SamplePair> train;
    std::vector<SamplePair> holdout;
};

// Seeded shuffle, then the first round(fraction * n) pairs become the
// training side. Both sides must come out nonempty.
SplitResult split_dataset(const std::vector<SamplePair>& pairs, double train_fraction,
                          std::uint64_t seed);

} // namespace skelbench
