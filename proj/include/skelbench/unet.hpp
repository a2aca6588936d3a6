#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelbench/adam.hpp"
#include "skelbench/layers.hpp"
#include "skelbench/rng.hpp"
#include "skelbench/tensor.hpp"

namespace skelbench {

struct UNetConfig {
    std::uint32_t depth = 2;         // down/up levels
    std::uint32_t base_channels = 8; // filters at the first level, doubling per level
    std::uint32_t input_size = 64;   // square inputs, divisible by 2^depth
};

inline void validate_unet_config(const UNetConfig& cfg) {
    if (cfg.depth < 1) {
        throw InvalidConfig("unet: depth must be at least 1");
    }
    if (cfg.depth > 16) {
        throw InvalidConfig("unet: depth " + std::to_string(cfg.depth) + " is not sane");
    }
    if (cfg.base_channels < 1) {
        throw InvalidConfig("unet: base_channels must be at least 1");
    }
    if (cfg.input_size == 0 || cfg.input_size % (1u << cfg.depth) != 0) {
        throw InvalidConfig("unet: input_size " + std::to_string(cfg.input_size) +
                            " not divisible by 2^" + std::to_string(cfg.depth));
    }
}

template <typename T>
struct ConvLayer {
    Tensor4<T> w; // [oc, ic, k, k]
    std::vector<T> b;
    Tensor4<T> gw;
    std::vector<T> gb;
    AdamState<T> sw, sb;

    void init(std::uint32_t oc, std::uint32_t ic, std::uint32_t k, Rng& rng) {
        w = Tensor4<T>(oc, ic, k, k);
        const double limit = std::sqrt(6.0 / (double(ic) * k * k));
        for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
        b.assign(oc, T(0));
        gw = Tensor4<T>(oc, ic, k, k);
        gb.assign(oc, T(0));
    }
};

template <typename T>
struct TConvLayer {
    Tensor4<T> w; // [ic, oc, 2, 2]
    Tensor4<T> gw;
    AdamState<T> sw;

    void init(std::uint32_t ic, std::uint32_t oc, Rng& rng) {
        w = Tensor4<T>(ic, oc, 2, 2);
        const double limit = std::sqrt(6.0 / (double(ic) * 4));
        for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
        gw = Tensor4<T>(ic, oc, 2, 2);
    }
};

// A named view into one parameter tensor, its gradient, and optimizer state.
// Registry order is the execution order and also the serialization order.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<T>* value;
    std::vector<T>* grad;
    AdamState<T>* opt;
};

template <typename T>
class UNet {
public:
    UNet() = default;

    UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        validate_unet_config(cfg);
        Rng rng(seed);
        const std::uint32_t d = cfg.depth;
        enc1_.resize(d);
        enc2_.resize(d);
        up_.resize(d);
        dec1_.resize(d);
        dec2_.resize(d);
        for (std::uint32_t lvl = 0; lvl < d; ++lvl) {
            const std::uint32_t in_ch = lvl == 0 ? 1 : ch(lvl - 1);
            enc1_[lvl].init(ch(lvl), in_ch, 3, rng);
            enc2_[lvl].init(ch(lvl), ch(lvl), 3, rng);
        }
        bott1_.init(ch(d), ch(d - 1), 3, rng);
        bott2_.init(ch(d), ch(d), 3, rng);
        for (std::uint32_t lvl = d; lvl-- > 0;) {
            up_[lvl].init(ch(lvl + 1), ch(lvl), rng);
            dec1_[lvl].init(ch(lvl), 2 * ch(lvl), 3, rng);
            dec2_[lvl].init(ch(lvl), ch(lvl), 3, rng);
        }
        head_.init(2, ch(0), 1, rng);
    }

    const UNetConfig& config() const { return cfg_; }
    std::uint32_t ch(std::uint32_t lvl) const { return cfg_.base_channels << lvl; }

    // probabilities [N,2,S,S]; activations are cached for backward
    const Tensor4<T>& forward(const Tensor4<T>& batch) {
        if (batch.c != 1 || batch.h != cfg_.input_size || batch.w != cfg_.input_size) {
            throw ShapeMismatch("unet forward: batch " + batch.shape_str() +
                                " vs configured input size " +
                                std::to_string(cfg_.input_size));
        }
        const std::uint32_t d = cfg_.depth;
        cache_.input = batch;
        cache_.enc_out1.resize(d);
        cache_.enc_out2.resize(d);
        cache_.pools.resize(d);
        cache_.up_out.resize(d);
        cache_.cat_out.resize(d);
        cache_.dec_out1.resize(d);
        cache_.dec_out2.resize(d);

        const Tensor4<T>* x = &cache_.input;
        for (std::uint32_t lvl = 0; lvl < d; ++lvl) {
            cache_.enc_out1[lvl] = relu(conv2d(*x, enc1_[lvl].w, enc1_[lvl].b));
            cache_.enc_out2[lvl] = relu(conv2d(cache_.enc_out1[lvl], enc2_[lvl].w, enc2_[lvl].b));
            cache_.pools[lvl] = maxpool2d(cache_.enc_out2[lvl]);
            x = &cache_.pools[lvl].output;
        }
        cache_.b1 = relu(conv2d(*x, bott1_.w, bott1_.b));
        cache_.b2 = relu(conv2d(cache_.b1, bott2_.w, bott2_.b));
        x = &cache_.b2;
        for (std::uint32_t lvl = d; lvl-- > 0;) {
            cache_.up_out[lvl] = transposed_conv2d(*x, up_[lvl].w);
            cache_.cat_out[lvl] = concat_channels(cache_.up_out[lvl], cache_.enc_out2[lvl]);
            cache_.dec_out1[lvl] = relu(conv2d(cache_.cat_out[lvl], dec1_[lvl].w, dec1_[lvl].b));
            cache_.dec_out2[lvl] = relu(conv2d(cache_.dec_out1[lvl], dec2_[lvl].w, dec2_[lvl].b));
            x = &cache_.dec_out2[lvl];
        }
        cache_.logits = conv2d(*x, head_.w, head_.b);
        cache_.probs = softmax2(cache_.logits);
        return cache_.probs;
    }

    // grad_probs: d loss / d probabilities from the most recent forward.
    // Fills every layer's gw/gb (assignment, not accumulation).
    void backward(const Tensor4<T>& grad_probs) {
        const std::uint32_t d = cfg_.depth;
        Tensor4<T> g = softmax2_backward(cache_.probs, grad_probs);
        {
            Conv2dGrads<T> hg = conv2d_backward(cache_.dec_out2[0], head_.w, g);
            head_.gw = std::move(hg.weights);
            head_.gb = std::move(hg.bias);
            g = std::move(hg.input);
        }
        std::vector<Tensor4<T>> skip_grads(d);
        for (std::uint32_t lvl = 0; lvl < d; ++lvl) { // decoder, shallowest first
            g = relu_backward(cache_.dec_out2[lvl], g);
            Conv2dGrads<T> g2 = conv2d_backward(cache_.dec_out1[lvl], dec2_[lvl].w, g);
            dec2_[lvl].gw = std::move(g2.weights);
            dec2_[lvl].gb = std::move(g2.bias);
            g = relu_backward(cache_.dec_out1[lvl], g2.input);
            Conv2dGrads<T> g1 = conv2d_backward(cache_.cat_out[lvl], dec1_[lvl].w, g);
            dec1_[lvl].gw = std::move(g1.weights);
            dec1_[lvl].gb = std::move(g1.bias);
            auto [gu, gskip] = split_channels(g1.input, cache_.up_out[lvl].c);
            skip_grads[lvl] = std::move(gskip);
            const Tensor4<T>& tin = lvl + 1 == d ? cache_.b2 : cache_.dec_out2[lvl + 1];
            TConv2dGrads<T> tg = transposed_conv2d_backward(tin, up_[lvl].w, gu);
            up_[lvl].gw = std::move(tg.weights);
            g = std::move(tg.input);
        }
        g = relu_backward(cache_.b2, g);
        {
            Conv2dGrads<T> bg = conv2d_backward(cache_.b1, bott2_.w, g);
            bott2_.gw = std::move(bg.weights);
            bott2_.gb = std::move(bg.bias);
            g = relu_backward(cache_.b1, bg.input);
            Conv2dGrads<T> bg1 = conv2d_backward(cache_.pools[d - 1].output, bott1_.w, g);
            bott1_.gw = std::move(bg1.weights);
            bott1_.gb = std::move(bg1.bias);
            g = std::move(bg1.input);
        }
        for (std::uint32_t lvl = d; lvl-- > 0;) { // encoder, deepest first
            const std::uint32_t s = cfg_.input_size >> lvl;
            g = maxpool2d_backward(cache_.pools[lvl], s, s, g);
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += skip_grads[lvl].data[i];
            g = relu_backward(cache_.enc_out2[lvl], g);
            Conv2dGrads<T> g2 = conv2d_backward(cache_.enc_out1[lvl], enc2_[lvl].w, g);
            enc2_[lvl].gw = std::move(g2.weights);
            enc2_[lvl].gb = std::move(g2.bias);
            g = relu_backward(cache_.enc_out1[lvl], g2.input);
            const Tensor4<T>& cin = lvl == 0 ? cache_.input : cache_.pools[lvl - 1].output;
            Conv2dGrads<T> g1 = conv2d_backward(cin, enc1_[lvl].w, g);
            enc1_[lvl].gw = std::move(g1.weights);
            enc1_[lvl].gb = std::move(g1.bias);
            g = std::move(g1.input);
        }
    }

    // cache-free forward for inference; safe on shared const instances
    Tensor4<T> forward_nograd(const Tensor4<T>& batch) const {
        if (batch.c != 1 || batch.h != cfg_.input_size || batch.w != cfg_.input_size) {
            throw ShapeMismatch("unet forward: batch " + batch.shape_str() +
                                " vs configured input size " +
                                std::to_string(cfg_.input_size));
        }
        const std::uint32_t d = cfg_.depth;
        std::vector<Tensor4<T>> skips(d);
        Tensor4<T> x = batch;
        for (std::uint32_t lvl = 0; lvl < d; ++lvl) {
            x = relu(conv2d(x, enc1_[lvl].w, enc1_[lvl].b));
            skips[lvl] = relu(conv2d(x, enc2_[lvl].w, enc2_[lvl].b));
            x = maxpool2d(skips[lvl]).output;
        }
        x = relu(conv2d(x, bott1_.w, bott1_.b));
        x = relu(conv2d(x, bott2_.w, bott2_.b));
        for (std::uint32_t lvl = d; lvl-- > 0;) {
            x = concat_channels(transposed_conv2d(x, up_[lvl].w), skips[lvl]);
            x = relu(conv2d(x, dec1_[lvl].w, dec1_[lvl].b));
            x = relu(conv2d(x, dec2_[lvl].w, dec2_[lvl].b));
        }
        return softmax2(conv2d(x, head_.w, head_.b));
    }

    void set_adam(const AdamConfig& acfg) {
        for (ParamRef<T>& p : params()) p.opt->cfg = acfg;
    }

    void step() {
        for (ParamRef<T>& p : params()) {
            adam_step(p.value->data(), p.grad->data(), p.value->size(), *p.opt);
        }
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        const auto conv = [&out](const std::string& name, ConvLayer<T>& l) {
            out.push_back({name + ".w", {l.w.n, l.w.c, l.w.h, l.w.w}, &l.w.data, &l.gw.data,
                           &l.sw});
            out.push_back({name + ".b", {static_cast<std::uint32_t>(l.b.size())}, &l.b,
                           &l.gb, &l.sb});
        };
        for (std::uint32_t lvl = 0; lvl < cfg_.depth; ++lvl) {
            const std::string p = "enc" + std::to_string(lvl);
            conv(p + ".conv1", enc1_[lvl]);
            conv(p + ".conv2", enc2_[lvl]);
        }
        conv("bottleneck.conv1", bott1_);
        conv("bottleneck.conv2", bott2_);
        for (std::uint32_t lvl = cfg_.depth; lvl-- > 0;) {
            const std::string p = "dec" + std::to_string(lvl);
            out.push_back({p + ".tconv.w",
                           {up_[lvl].w.n, up_[lvl].w.c, up_[lvl].w.h, up_[lvl].w.w},
                           &up_[lvl].w.data, &up_[lvl].gw.data, &up_[lvl].sw});
            conv(p + ".conv1", dec1_[lvl]);
            conv(p + ".conv2", dec2_[lvl]);
        }
        conv("head", head_);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const ParamRef<T>& p : params()) n += p.value->size();
        return n;
    }

    const Tensor4<T>& probs() const { return cache_.probs; }

private:
    struct Cache {
        Tensor4<T> input;
        std::vector<Tensor4<T>> enc_out1, enc_out2;
        std::vector<MaxPool2dResult<T>> pools;
        Tensor4<T> b1, b2;
        std::vector<Tensor4<T>> up_out, cat_out, dec_out1, dec_out2;
        Tensor4<T> logits, probs;
    };

    UNetConfig cfg_;
    std::vector<ConvLayer<T>> enc1_, enc2_;
    ConvLayer<T> bott1_, bott2_;
    std::vector<TConvLayer<T>> up_;
    std::vector<ConvLayer<T>> dec1_, dec2_;
    ConvLayer<T> head_;
    Cache cache_;
};

template <typename T>
UNet<T> build_unet(const UNetConfig& cfg, std::uint64_t seed) {
    return UNet<T>(cfg, seed);
}

} // namespace skelbench
