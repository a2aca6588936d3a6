#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "skelbench/image.hpp"
#include "skelbench/parallel.hpp"
#include "skelbench/tensor.hpp"

namespace skelbench {

// ---------------------------------------------------------------------------
// conv2d: odd square kernel (1x1 or 3x3), stride 1, zero padding k/2, so the
// spatial size is preserved. weights [outC, inC, k, k].

// dot product over a row pair, accumulated in 16 fixed lanes so the reduction
// vectorizes without changing results across runs
template <typename T>
inline T lane_dot(const T* __restrict__ a, const T* __restrict__ b, int n) {
    T lanes[16] = {};
    int i = 0;
    for (; i + 16 <= n; i += 16) {
        for (int j = 0; j < 16; ++j) lanes[j] += a[i + j] * b[i + j];
    }
    if (i + 8 <= n) {
        for (int j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
        i += 8;
    }
    if (i + 4 <= n) {
        for (int j = 0; j < 4; ++j) lanes[j] += a[i + j] * b[i + j];
        i += 4;
    }
    T acc = T(0);
    for (; i < n; ++i) acc += a[i] * b[i];
    for (int j = 0; j < 16; ++j) acc += lanes[j];
    return acc;
}

template <typename T>
inline T lane_sum(const T* __restrict__ a, std::size_t n) {
    T lanes[16] = {};
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        for (int j = 0; j < 16; ++j) lanes[j] += a[i + j];
    }
    T acc = T(0);
    for (; i < n; ++i) acc += a[i];
    for (int j = 0; j < 16; ++j) acc += lanes[j];
    return acc;
}

template <typename T>
inline void check_conv_args(const Tensor4<T>& in, const Tensor4<T>& wt,
                            const std::vector<T>& bias) {
    if (wt.h != wt.w || (wt.h != 1 && wt.h != 3)) {
        throw ShapeMismatch("conv2d: kernel must be 1x1 or 3x3, got " + wt.shape_str());
    }
    if (in.c != wt.c) {
        throw ShapeMismatch("conv2d: input channels " + in.shape_str() +
                            " vs weights " + wt.shape_str());
    }
    if (bias.size() != wt.n) {
        throw ShapeMismatch("conv2d: bias size " + std::to_string(bias.size()) +
                            " vs " + std::to_string(wt.n) + " output channels");
    }
}

// copy with a one-pixel zero border so 3x3 taps never need bounds checks
template <typename T>
Tensor4<T> pad_planes(const Tensor4<T>& t) {
    Tensor4<T> out(t.n, t.c, t.h + 2, t.w + 2);
    for (std::uint32_t bn = 0; bn < t.n; ++bn) {
        for (std::uint32_t c = 0; c < t.c; ++c) {
            const T* const src = t.plane(bn, c);
            T* const dst = out.plane(bn, c) + (t.w + 2) + 1;
            for (std::uint32_t y = 0; y < t.h; ++y) {
                std::copy(src + std::size_t(y) * t.w, src + std::size_t(y + 1) * t.w,
                          dst + std::size_t(y) * (t.w + 2));
            }
        }
    }
    return out;
}

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& in, const Tensor4<T>& wt, const std::vector<T>& bias) {
    check_conv_args(in, wt, bias);
    const int k = static_cast<int>(wt.h);
    const int h = static_cast<int>(in.h), w = static_cast<int>(in.w);
    Tensor4<T> out(in.n, wt.n, in.h, in.w);

    if (k == 1) {
        parallel_for(std::size_t(in.n) * wt.n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t t = lo; t < hi; ++t) {
                const std::uint32_t bn = static_cast<std::uint32_t>(t / wt.n);
                const std::uint32_t oc = static_cast<std::uint32_t>(t % wt.n);
                T* const op = out.plane(bn, oc);
                const T bv = bias[oc];
                for (std::size_t i = 0; i < out.plane_size(); ++i) op[i] = bv;
                for (std::uint32_t ic = 0; ic < in.c; ++ic) {
                    const T* const ip = in.plane(bn, ic);
                    const T wv = wt.at(oc, ic, 0, 0);
                    for (std::size_t i = 0; i < out.plane_size(); ++i) op[i] += wv * ip[i];
                }
            }
        });
        return out;
    }

    const Tensor4<T> pin = pad_planes(in);
    const int pw = w + 2;
    parallel_for(std::size_t(in.n) * wt.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / wt.n);
            const std::uint32_t oc = static_cast<std::uint32_t>(t % wt.n);
            T* const op = out.plane(bn, oc);
            const T bv = bias[oc];
            for (std::size_t i = 0; i < out.plane_size(); ++i) op[i] = bv;
            for (std::uint32_t ic = 0; ic < in.c; ++ic) {
                const T* const ip = pin.plane(bn, ic);
                const T w00 = wt.at(oc, ic, 0, 0), w01 = wt.at(oc, ic, 0, 1),
                        w02 = wt.at(oc, ic, 0, 2);
                const T w10 = wt.at(oc, ic, 1, 0), w11 = wt.at(oc, ic, 1, 1),
                        w12 = wt.at(oc, ic, 1, 2);
                const T w20 = wt.at(oc, ic, 2, 0), w21 = wt.at(oc, ic, 2, 1),
                        w22 = wt.at(oc, ic, 2, 2);
                for (int y = 0; y < h; ++y) {
                    const T* __restrict__ r0 = ip + std::size_t(y) * pw;
                    const T* __restrict__ r1 = r0 + pw;
                    const T* __restrict__ r2 = r1 + pw;
                    T* __restrict__ orow = op + std::size_t(y) * w;
                    for (int x = 0; x < w; ++x) {
                        orow[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                                   w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                                   w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
                    }
                }
            }
        }
    });
    return out;
}

template <typename T>
struct Conv2dGrads {
    Tensor4<T> input;
    Tensor4<T> weights;
    std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& in, const Tensor4<T>& wt,
                               const Tensor4<T>& grad_out) {
    const int k = static_cast<int>(wt.h);
    const int h = static_cast<int>(in.h), w = static_cast<int>(in.w);
    if (grad_out.n != in.n || grad_out.c != wt.n || grad_out.h != in.h ||
        grad_out.w != in.w) {
        throw ShapeMismatch("conv2d_backward: grad " + grad_out.shape_str() +
                            " does not match forward shapes");
    }
    Conv2dGrads<T> g;
    g.input = Tensor4<T>(in.n, in.c, in.h, in.w);
    g.weights = Tensor4<T>(wt.n, wt.c, wt.h, wt.w);
    g.bias.assign(wt.n, T(0));

    if (k == 1) {
        parallel_for(std::size_t(in.n) * in.c, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t t = lo; t < hi; ++t) {
                const std::uint32_t bn = static_cast<std::uint32_t>(t / in.c);
                const std::uint32_t ic = static_cast<std::uint32_t>(t % in.c);
                T* const gp = g.input.plane(bn, ic);
                for (std::uint32_t oc = 0; oc < wt.n; ++oc) {
                    const T* const op = grad_out.plane(bn, oc);
                    const T wv = wt.at(oc, ic, 0, 0);
                    for (std::size_t i = 0; i < grad_out.plane_size(); ++i) {
                        gp[i] += wv * op[i];
                    }
                }
            }
        });
        parallel_for(wt.n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t oc = lo; oc < hi; ++oc) {
                T bsum = T(0);
                for (std::uint32_t bn = 0; bn < in.n; ++bn) {
                    const T* const op = grad_out.plane(bn, static_cast<std::uint32_t>(oc));
                    bsum += lane_sum(op, grad_out.plane_size());
                    for (std::uint32_t ic = 0; ic < in.c; ++ic) {
                        g.weights.at(static_cast<std::uint32_t>(oc), ic, 0, 0) +=
                            lane_dot(op, in.plane(bn, ic), static_cast<int>(in.plane_size()));
                    }
                }
                g.bias[oc] = bsum;
            }
        });
        return g;
    }

    // input gradient is the correlation of grad_out with the flipped kernel
    const Tensor4<T> pgo = pad_planes(grad_out);
    const int pw = w + 2;
    parallel_for(std::size_t(in.n) * in.c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / in.c);
            const std::uint32_t ic = static_cast<std::uint32_t>(t % in.c);
            T* const gp = g.input.plane(bn, ic);
            for (std::uint32_t oc = 0; oc < wt.n; ++oc) {
                const T* const op = pgo.plane(bn, oc);
                const T w00 = wt.at(oc, ic, 2, 2), w01 = wt.at(oc, ic, 2, 1),
                        w02 = wt.at(oc, ic, 2, 0);
                const T w10 = wt.at(oc, ic, 1, 2), w11 = wt.at(oc, ic, 1, 1),
                        w12 = wt.at(oc, ic, 1, 0);
                const T w20 = wt.at(oc, ic, 0, 2), w21 = wt.at(oc, ic, 0, 1),
                        w22 = wt.at(oc, ic, 0, 0);
                for (int y = 0; y < h; ++y) {
                    const T* __restrict__ r0 = op + std::size_t(y) * pw;
                    const T* __restrict__ r1 = r0 + pw;
                    const T* __restrict__ r2 = r1 + pw;
                    T* __restrict__ grow = gp + std::size_t(y) * w;
                    for (int x = 0; x < w; ++x) {
                        grow[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                                   w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                                   w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
                    }
                }
            }
        }
    });

    // weight and bias gradients: one task per output channel, batch summed in
    // index order inside the task (deterministic for any worker count)
    const Tensor4<T> pin = pad_planes(in);
    parallel_for(wt.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t oc = lo; oc < hi; ++oc) {
            T bsum = T(0);
            for (std::uint32_t bn = 0; bn < in.n; ++bn) {
                const T* const op = grad_out.plane(bn, static_cast<std::uint32_t>(oc));
                bsum += lane_sum(op, grad_out.plane_size());
                for (std::uint32_t ic = 0; ic < in.c; ++ic) {
                    const T* const ip = pin.plane(bn, ic);
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            T acc = T(0);
                            for (int y = 0; y < h; ++y) {
                                acc += lane_dot(op + std::size_t(y) * w,
                                                ip + std::size_t(y + ky) * pw + kx, w);
                            }
                            g.weights.at(static_cast<std::uint32_t>(oc), ic, ky, kx) += acc;
                        }
                    }
                }
            }
            g.bias[oc] = bsum;
        }
    });
    return g;
}

// ---------------------------------------------------------------------------
// transposed_conv2d: kernel 2x2, stride 2, no bias; exact adjoint of a
// stride-2 convolution, doubling H and W. weights [inC, outC, 2, 2]. With
// stride equal to kernel size the taps never overlap, so each output pixel is
// a single weighted read per input channel.

template <typename T>
Tensor4<T> transposed_conv2d(const Tensor4<T>& in, const Tensor4<T>& wt) {
    if (wt.h != 2 || wt.w != 2) {
        throw ShapeMismatch("transposed_conv2d: kernel must be 2x2, got " + wt.shape_str());
    }
    if (in.c != wt.n) {
        throw ShapeMismatch("transposed_conv2d: input channels " + in.shape_str() +
                            " vs weights " + wt.shape_str());
    }
    const int h = static_cast<int>(in.h), w = static_cast<int>(in.w);
    Tensor4<T> out(in.n, wt.c, in.h * 2, in.w * 2);
    parallel_for(std::size_t(in.n) * wt.c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / wt.c);
            const std::uint32_t oc = static_cast<std::uint32_t>(t % wt.c);
            T* const op = out.plane(bn, oc);
            for (std::uint32_t ic = 0; ic < in.c; ++ic) {
                const T* const ip = in.plane(bn, ic);
                const T w00 = wt.at(ic, oc, 0, 0), w01 = wt.at(ic, oc, 0, 1);
                const T w10 = wt.at(ic, oc, 1, 0), w11 = wt.at(ic, oc, 1, 1);
                for (int y = 0; y < h; ++y) {
                    const T* __restrict__ irow = ip + std::size_t(y) * w;
                    T* __restrict__ orow0 = op + std::size_t(2 * y) * (2 * w);
                    T* __restrict__ orow1 = orow0 + 2 * w;
                    for (int x = 0; x < w; ++x) {
                        const T v = irow[x];
                        orow0[2 * x] += w00 * v;
                        orow0[2 * x + 1] += w01 * v;
                        orow1[2 * x] += w10 * v;
                        orow1[2 * x + 1] += w11 * v;
                    }
                }
            }
        }
    });
    return out;
}

template <typename T>
struct TConv2dGrads {
    Tensor4<T> input;
    Tensor4<T> weights;
};

template <typename T>
TConv2dGrads<T> transposed_conv2d_backward(const Tensor4<T>& in, const Tensor4<T>& wt,
                                           const Tensor4<T>& grad_out) {
    if (grad_out.n != in.n || grad_out.c != wt.c || grad_out.h != in.h * 2 ||
        grad_out.w != in.w * 2) {
        throw ShapeMismatch("transposed_conv2d_backward: grad " + grad_out.shape_str() +
                            " does not match forward shapes");
    }
    const int h = static_cast<int>(in.h), w = static_cast<int>(in.w);
    TConv2dGrads<T> g;
    g.input = Tensor4<T>(in.n, in.c, in.h, in.w);
    g.weights = Tensor4<T>(wt.n, wt.c, wt.h, wt.w);

    parallel_for(std::size_t(in.n) * in.c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / in.c);
            const std::uint32_t ic = static_cast<std::uint32_t>(t % in.c);
            T* const gp = g.input.plane(bn, ic);
            for (std::uint32_t oc = 0; oc < wt.c; ++oc) {
                const T* const op = grad_out.plane(bn, oc);
                const T w00 = wt.at(ic, oc, 0, 0), w01 = wt.at(ic, oc, 0, 1);
                const T w10 = wt.at(ic, oc, 1, 0), w11 = wt.at(ic, oc, 1, 1);
                for (int y = 0; y < h; ++y) {
                    T* __restrict__ grow = gp + std::size_t(y) * w;
                    const T* __restrict__ orow0 = op + std::size_t(2 * y) * (2 * w);
                    const T* __restrict__ orow1 = orow0 + 2 * w;
                    for (int x = 0; x < w; ++x) {
                        grow[x] += w00 * orow0[2 * x] + w01 * orow0[2 * x + 1] +
                                   w10 * orow1[2 * x] + w11 * orow1[2 * x + 1];
                    }
                }
            }
        }
    });

    parallel_for(wt.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ict = lo; ict < hi; ++ict) {
            const std::uint32_t ic = static_cast<std::uint32_t>(ict);
            for (std::uint32_t oc = 0; oc < wt.c; ++oc) {
                T acc[2][2] = {{T(0), T(0)}, {T(0), T(0)}};
                for (std::uint32_t bn = 0; bn < in.n; ++bn) {
                    const T* const ip = in.plane(bn, ic);
                    const T* const op = grad_out.plane(bn, oc);
                    for (int y = 0; y < h; ++y) {
                        const T* __restrict__ irow = ip + std::size_t(y) * w;
                        const T* __restrict__ orow0 = op + std::size_t(2 * y) * (2 * w);
                        const T* __restrict__ orow1 = orow0 + 2 * w;
                        for (int x = 0; x < w; ++x) {
                            const T v = irow[x];
                            acc[0][0] += v * orow0[2 * x];
                            acc[0][1] += v * orow0[2 * x + 1];
                            acc[1][0] += v * orow1[2 * x];
                            acc[1][1] += v * orow1[2 * x + 1];
                        }
                    }
                }
                for (int ky = 0; ky < 2; ++ky) {
                    for (int kx = 0; kx < 2; ++kx) g.weights.at(ic, oc, ky, kx) = acc[ky][kx];
                }
            }
        }
    });
    return g;
}

// ---------------------------------------------------------------------------
// maxpool2d: 3x3 window, stride 2, padding 1 with -inf fill, so H and W halve.
// argmax holds the winning in-plane index per output element, ties to the
// first position in row-major scan.

template <typename T>
struct MaxPool2dResult {
    Tensor4<T> output;
    std::vector<std::uint32_t> argmax;
};

template <typename T>
MaxPool2dResult<T> maxpool2d(const Tensor4<T>& in) {
    if (in.h % 2 != 0 || in.w % 2 != 0) {
        throw OddSpatialDims("maxpool2d: spatial dims must be even, got " + in.shape_str());
    }
    const int h = static_cast<int>(in.h), w = static_cast<int>(in.w);
    const int oh = h / 2, ow = w / 2;
    MaxPool2dResult<T> res;
    res.output = Tensor4<T>(in.n, in.c, oh, ow);
    res.argmax.assign(res.output.size(), 0);
    parallel_for(std::size_t(in.n) * in.c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / in.c);
            const std::uint32_t ic = static_cast<std::uint32_t>(t % in.c);
            const T* const ip = in.plane(bn, ic);
            T* const op = res.output.plane(bn, ic);
            std::uint32_t* const ap =
                res.argmax.data() + (std::size_t(bn) * in.c + ic) * res.output.plane_size();
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    bool first = true;
                    T best = T(0);
                    std::uint32_t bidx = 0;
                    for (int wy = 2 * oy - 1; wy <= 2 * oy + 1; ++wy) {
                        if (wy < 0 || wy >= h) continue;
                        for (int wx = 2 * ox - 1; wx <= 2 * ox + 1; ++wx) {
                            if (wx < 0 || wx >= w) continue;
                            const T v = ip[std::size_t(wy) * w + wx];
                            if (first || v > best) {
                                first = false;
                                best = v;
                                bidx = static_cast<std::uint32_t>(wy * w + wx);
                            }
                        }
                    }
                    op[std::size_t(oy) * ow + ox] = best;
                    ap[std::size_t(oy) * ow + ox] = bidx;
                }
            }
        }
    });
    return res;
}

template <typename T>
Tensor4<T> maxpool2d_backward(const MaxPool2dResult<T>& fwd, std::uint32_t in_h,
                              std::uint32_t in_w, const Tensor4<T>& grad_out) {
    require_same_shape(fwd.output, grad_out, "maxpool2d_backward");
    Tensor4<T> gin(grad_out.n, grad_out.c, in_h, in_w);
    parallel_for(std::size_t(grad_out.n) * grad_out.c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t bn = static_cast<std::uint32_t>(t / grad_out.c);
            const std::uint32_t ic = static_cast<std::uint32_t>(t % grad_out.c);
            const T* const op = grad_out.plane(bn, ic);
            const std::uint32_t* const ap =
                fwd.argmax.data() + (std::size_t(bn) * grad_out.c + ic) * grad_out.plane_size();
            T* const gp = gin.plane(bn, ic);
            for (std::size_t i = 0; i < grad_out.plane_size(); ++i) gp[ap[i]] += op[i];
        }
    });
    return gin;
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
Tensor4<T> relu(const Tensor4<T>& in) {
    Tensor4<T> out(in.n, in.c, in.h, in.w);
    parallel_for(in.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
        }
    });
    return out;
}

// takes the forward OUTPUT: out > 0 exactly where in > 0, and the x = 0
// subgradient is 0 either way
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& out, const Tensor4<T>& grad_out) {
    require_same_shape(out, grad_out, "relu_backward");
    Tensor4<T> gin(out.n, out.c, out.h, out.w);
    parallel_for(out.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            gin.data[i] = out.data[i] > T(0) ? grad_out.data[i] : T(0);
        }
    });
    return gin;
}

// ---------------------------------------------------------------------------
// softmax2: per-pixel 2-class softmax with max subtraction

template <typename T>
Tensor4<T> softmax2(const Tensor4<T>& logits) {
    if (logits.c != 2) {
        throw ShapeMismatch("softmax2: expected 2 channels, got " + logits.shape_str());
    }
    Tensor4<T> out(logits.n, 2, logits.h, logits.w);
    parallel_for(logits.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t bn = lo; bn < hi; ++bn) {
            const T* const l0 = logits.plane(static_cast<std::uint32_t>(bn), 0);
            const T* const l1 = logits.plane(static_cast<std::uint32_t>(bn), 1);
            T* const p0 = out.plane(static_cast<std::uint32_t>(bn), 0);
            T* const p1 = out.plane(static_cast<std::uint32_t>(bn), 1);
            for (std::size_t i = 0; i < logits.plane_size(); ++i) {
                const T m = std::max(l0[i], l1[i]);
                const T e0 = std::exp(l0[i] - m), e1 = std::exp(l1[i] - m);
                const T inv = T(1) / (e0 + e1);
                p0[i] = e0 * inv;
                p1[i] = e1 * inv;
            }
        }
    });
    return out;
}

template <typename T>
Tensor4<T> softmax2_backward(const Tensor4<T>& probs, const Tensor4<T>& grad_probs) {
    require_same_shape(probs, grad_probs, "softmax2_backward");
    Tensor4<T> gl(probs.n, 2, probs.h, probs.w);
    parallel_for(probs.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t bn = lo; bn < hi; ++bn) {
            const std::uint32_t b = static_cast<std::uint32_t>(bn);
            const T* const p0 = probs.plane(b, 0);
            const T* const p1 = probs.plane(b, 1);
            const T* const g0 = grad_probs.plane(b, 0);
            const T* const g1 = grad_probs.plane(b, 1);
            T* const o0 = gl.plane(b, 0);
            T* const o1 = gl.plane(b, 1);
            for (std::size_t i = 0; i < probs.plane_size(); ++i) {
                const T dot = g0[i] * p0[i] + g1[i] * p1[i];
                o0[i] = p0[i] * (g0[i] - dot);
                o1[i] = p1[i] * (g1[i] - dot);
            }
        }
    });
    return gl;
}

// ---------------------------------------------------------------------------
// channel concatenation (the U-Net skip junction) and its split adjoint

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw ShapeMismatch("concat_channels: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
    parallel_for(out.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t bn = lo; bn < hi; ++bn) {
            const std::uint32_t n = static_cast<std::uint32_t>(bn);
            for (std::uint32_t c = 0; c < a.c; ++c) {
                std::copy_n(a.plane(n, c), a.plane_size(), out.plane(n, c));
            }
            for (std::uint32_t c = 0; c < b.c; ++c) {
                std::copy_n(b.plane(n, c), b.plane_size(), out.plane(n, a.c + c));
            }
        }
    });
    return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& g, std::uint32_t ca) {
    if (ca > g.c) throw ShapeMismatch("split_channels: split point past channel count");
    Tensor4<T> a(g.n, ca, g.h, g.w), b(g.n, g.c - ca, g.h, g.w);
    for (std::uint32_t n = 0; n < g.n; ++n) {
        for (std::uint32_t c = 0; c < ca; ++c) {
            std::copy_n(g.plane(n, c), g.plane_size(), a.plane(n, c));
        }
        for (std::uint32_t c = ca; c < g.c; ++c) {
            std::copy_n(g.plane(n, c), g.plane_size(), b.plane(n, c - ca));
        }
    }
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// weighted loss over per-pixel class probabilities, mean over pixels and batch

enum class LossMode {
    Literal,      // 1 - w_c * p_c   (the affine form; can go negative)
    StandardWCCE, // -w_c * ln(p_c + 1e-12)
};

struct LossConfig {
    double w0 = 1.0;  // background weight
    double w1 = 25.0; // skeleton weight
    LossMode mode = LossMode::StandardWCCE;
};

inline void check_loss_config(const LossConfig& cfg) {
    if (!(cfg.w0 > 0.0) || !(cfg.w1 > 0.0)) {
        throw InvalidConfig("loss weights must be positive, got w0=" +
                            std::to_string(cfg.w0) + " w1=" + std::to_string(cfg.w1));
    }
}

template <typename T>
struct WeightedLossResult {
    double value = 0.0;
    Tensor4<T> grad; // d value / d probs
};

template <typename T>
WeightedLossResult<T> weighted_loss(const Tensor4<T>& probs,
                                    const std::vector<BinaryMask>& targets,
                                    const LossConfig& cfg) {
    check_loss_config(cfg);
    if (probs.c != 2 || targets.size() != probs.n) {
        throw ShapeMismatch("weighted_loss: probs " + probs.shape_str() + " vs " +
                            std::to_string(targets.size()) + " targets");
    }
    for (const BinaryMask& t : targets) {
        if (t.height != probs.h || t.width != probs.w) {
            throw ShapeMismatch("weighted_loss: target " + std::to_string(t.width) + "x" +
                                std::to_string(t.height) + " vs probs " + probs.shape_str());
        }
    }
    WeightedLossResult<T> res;
    res.grad = Tensor4<T>(probs.n, 2, probs.h, probs.w);
    const double scale = 1.0 / (double(probs.n) * probs.plane_size());
    const double wts[2] = {cfg.w0, cfg.w1};
    std::vector<double> slot(probs.n, 0.0);
    parallel_for(probs.n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t bn = lo; bn < hi; ++bn) {
            const std::uint32_t b = static_cast<std::uint32_t>(bn);
            const T* const pr[2] = {probs.plane(b, 0), probs.plane(b, 1)};
            T* const gr[2] = {res.grad.plane(b, 0), res.grad.plane(b, 1)};
            const std::uint8_t* const tgt = targets[bn].data.data();
            double sum = 0.0;
            for (std::size_t i = 0; i < probs.plane_size(); ++i) {
                const int c = tgt[i] ? 1 : 0;
                const double w = wts[c];
                const double p = double(pr[c][i]);
                if (cfg.mode == LossMode::Literal) {
                    sum += 1.0 - w * p;
                    gr[c][i] = static_cast<T>(-w * scale);
                } else {
                    sum += -w * std::log(p + 1e-12);
                    gr[c][i] = static_cast<T>(-w * scale / (p + 1e-12));
                }
            }
            slot[bn] = sum;
        }
    });
    double total = 0.0;
    for (double s : slot) total += s;
    res.value = total * scale;
    return res;
}

} // namespace skelbench
