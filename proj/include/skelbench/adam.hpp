#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "skelbench/errors.hpp"

namespace skelbench {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<T> m, v;
    std::uint64_t t = 0;
    AdamConfig cfg;
};

// One bias-corrected step: p -= lr * m_hat / (sqrt(v_hat) + eps). Moments are
// allocated on first use and sized to the parameter span.
template <typename T>
void adam_step(T* params, const T* grads, std::size_t count, AdamState<T>& st) {
    if (st.m.empty()) {
        st.m.assign(count, T(0));
        st.v.assign(count, T(0));
    }
    if (st.m.size() != count) {
        throw ShapeMismatch("adam_step: state sized " + std::to_string(st.m.size()) +
                            " vs " + std::to_string(count) + " parameters");
    }
    st.t += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, double(st.t));
    const double c2 = 1.0 - std::pow(b2, double(st.t));
    const double lr = st.cfg.lr, eps = st.cfg.eps;
    for (std::size_t i = 0; i < count; ++i) {
        const double g = double(grads[i]);
        const double m = b1 * double(st.m[i]) + (1.0 - b1) * g;
        const double v = b2 * double(st.v[i]) + (1.0 - b2) * g * g;
        st.m[i] = static_cast<T>(m);
        st.v[i] = static_cast<T>(v);
        params[i] -= static_cast<T>(lr * (m / c1) / (std::sqrt(v / c2) + eps));
    }
}

template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads, AdamState<T>& st) {
    if (params.size() != grads.size()) {
        throw ShapeMismatch("adam_step: " + std::to_string(params.size()) +
                            " parameters vs " + std::to_string(grads.size()) + " gradients");
    }
    adam_step(params.data(), grads.data(), params.size(), st);
}

} // namespace skelbench
