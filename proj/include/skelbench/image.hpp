#pragma once

#include <cstdint>
#include <vector>

#include "skelbench/errors.hpp"

namespace skelbench {

// Binary raster. Coordinates are (row, col) with origin at the top-left;
// dx moves columns, dy moves rows.
struct BinaryMask {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> data; // row-major, 0 = background, 1 = foreground

    BinaryMask() = default;
    BinaryMask(std::uint32_t w, std::uint32_t h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(std::uint32_t r, std::uint32_t c) const {
        return data[static_cast<std::size_t>(r) * width + c] != 0;
    }
    void set(std::uint32_t r, std::uint32_t c, bool v) {
        data[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0;
    }
    std::size_t pixel_count() const { return data.size(); }
    std::size_t foreground_count() const;
    bool empty_mask() const { return foreground_count() == 0; }

    bool operator==(const BinaryMask&) const = default;
};

struct GrayImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> data; // row-major

    GrayImage() = default;
    GrayImage(std::uint32_t w, std::uint32_t h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}

    double at(std::uint32_t r, std::uint32_t c) const {
        return data[static_cast<std::size_t>(r) * width + c];
    }
    double& at(std::uint32_t r, std::uint32_t c) {
        return data[static_cast<std::size_t>(r) * width + c];
    }
};

// Inclusive bounds.
struct BBox {
    std::uint32_t rmin = 0, cmin = 0, rmax = 0, cmax = 0;

    double center_row() const { return (static_cast<double>(rmin) + rmax) / 2.0; }
    double center_col() const { return (static_cast<double>(cmin) + cmax) / 2.0; }

    bool operator==(const BBox&) const = default;
};

// Foreground pixel (r, c) maps to (r + dy, c + dx); pixels leaving the frame
// are discarded, vacated pixels become background.
BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy);

// Tightest inclusive box around the foreground. Throws EmptyMaskError.
BBox bounding_box(const BinaryMask& mask);

// Exact Euclidean distance to the nearest background pixel, where pixels
// beyond the frame count as background (keeps all values finite). Background
// pixels hold 0. Two-pass 1-D lower-envelope squared-distance method.
GrayImage distance_transform(const BinaryMask& mask);

struct Components {
    std::size_t count = 0;
    std::vector<std::uint32_t> labels; // 0 = background; 1..count dense
};

// 8-connectivity labeling; labels assigned in row-major discovery order.
Components connected_components(const BinaryMask& mask);

} // namespace skelbench
