#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelbench/errors.hpp"

namespace skelbench {

// Dense [batch, channels, height, width] tensor, row-major. float carries
// training state; double is for the finite-difference harness.
template <typename T>
struct Tensor4 {
    std::uint32_t n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(std::uint32_t n_, std::uint32_t c_, std::uint32_t h_, std::uint32_t w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(std::size_t(n_) * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane_size() const { return std::size_t(h) * w; }

    T* plane(std::uint32_t in, std::uint32_t ic) {
        return data.data() + (std::size_t(in) * c + ic) * plane_size();
    }
    const T* plane(std::uint32_t in, std::uint32_t ic) const {
        return data.data() + (std::size_t(in) * c + ic) * plane_size();
    }

    T& at(std::uint32_t in, std::uint32_t ic, std::uint32_t y, std::uint32_t x) {
        return plane(in, ic)[std::size_t(y) * w + x];
    }
    T at(std::uint32_t in, std::uint32_t ic, std::uint32_t y, std::uint32_t x) const {
        return plane(in, ic)[std::size_t(y) * w + x];
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + "]";
    }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

template <typename T>
inline void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b,
                               const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(where) + ": " + a.shape_str() + " vs " +
                            b.shape_str());
    }
}

} // namespace skelbench
