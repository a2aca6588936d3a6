#pragma once

#include <cstdint>

#include "skelbench/image.hpp"

namespace skelbench {

enum class ThinningVariant { ZhangSuen, MedialAxis };

struct ThinningAlgo {
    ThinningVariant variant = ThinningVariant::ZhangSuen;
    std::uint32_t prune_length = 0; // spur-removal threshold, 0 = off
};

// Two-subiteration thinning, iterated to a fixed point. The frame is treated
// as background. Output is a subset of the input and 8-connected-thin.
BinaryMask zhang_suen_thin(const BinaryMask& shape);

// Ridge of the Euclidean distance transform: foreground pixels whose value is
// >= both neighbors and > at least one of them along some axis/diagonal
// direction.
BinaryMask medial_axis(const BinaryMask& shape);

// Removes terminal branches shorter than max_len (pixels counted from the
// endpoint up to, not including, the nearest junction). A skeleton that is a
// plain path, with no junction, is left alone. Iterated to a fixed point.
BinaryMask prune_spurs(const BinaryMask& skel, std::uint32_t max_len);

// variant + pruning in one call.
BinaryMask skeletonize(const BinaryMask& shape, const ThinningAlgo& algo);

} // namespace skelbench
