#include "skelbench/pipeline.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace skelbench {

namespace {

void check_sample_dims(const std::vector<BinaryMask>& masks, std::uint32_t size,
                       const char* what) {
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].width != size || masks[i].height != size) {
            throw DimensionMismatch(std::string(what) + " sample " + std::to_string(i) +
                                    " is " + std::to_string(masks[i].width) + "x" +
                                    std::to_string(masks[i].height) + ", expected " +
                                    std::to_string(size) + "x" + std::to_string(size));
        }
    }
}

Tensor4<float> to_batch(const std::vector<BinaryMask>& masks,
                        const std::vector<std::size_t>& order, std::size_t start,
                        std::size_t count, std::uint32_t size) {
    Tensor4<float> x(static_cast<std::uint32_t>(count), 1, size, size);
    for (std::size_t b = 0; b < count; ++b) {
        const BinaryMask& m = masks[order[start + b]];
        float* dst = x.plane(static_cast<std::uint32_t>(b), 0);
        for (std::size_t i = 0; i < m.data.size(); ++i) dst[i] = m.data[i] ? 1.0f : 0.0f;
    }
    return x;
}

BinaryMask binarize_plane(const Tensor4<float>& probs, std::uint32_t b) {
    BinaryMask out(probs.w, probs.h);
    const float* p0 = probs.plane(b, 0);
    const float* p1 = probs.plane(b, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = p1[i] >= p0[i] ? 1 : 0;
    return out;
}

std::vector<BinaryMask> apply_stage(const UNet<float>& net,
                                    const std::vector<BinaryMask>& masks,
                                    std::uint32_t batch_size) {
    const std::uint32_t size = net.config().input_size;
    std::vector<std::size_t> order(masks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<BinaryMask> out(masks.size());
    for (std::size_t start = 0; start < masks.size(); start += batch_size) {
        const std::size_t count = std::min<std::size_t>(batch_size, masks.size() - start);
        const Tensor4<float> probs = net.forward_nograd(to_batch(masks, order, start, count, size));
        for (std::size_t b = 0; b < count; ++b) {
            out[start + b] = binarize_plane(probs, static_cast<std::uint32_t>(b));
        }
    }
    return out;
}

} // namespace

std::vector<double> train_stage(UNet<float>& net, const std::vector<BinaryMask>& inputs,
                                const std::vector<BinaryMask>& targets,
                                const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    if (inputs.empty()) throw EmptyDataset("train_stage: no samples");
    if (inputs.size() != targets.size()) {
        throw DimensionMismatch("train_stage: " + std::to_string(inputs.size()) +
                                " inputs vs " + std::to_string(targets.size()) + " targets");
    }
    const std::uint32_t size = net.config().input_size;
    check_sample_dims(inputs, size, "train_stage input");
    check_sample_dims(targets, size, "train_stage target");

    net.set_adam(cfg.adam);
    Rng shuffle_rng(cfg.seed);
    const std::size_t n = inputs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, n - start);
            const Tensor4<float> x = to_batch(inputs, order, start, count, size);
            std::vector<BinaryMask> batch_targets(count);
            for (std::size_t b = 0; b < count; ++b) {
                batch_targets[b] = targets[order[start + b]];
            }
            const Tensor4<float>& probs = net.forward(x);
            WeightedLossResult<float> loss = weighted_loss(probs, batch_targets, cfg.loss);
            if (!std::isfinite(loss.value)) {
                throw NonFiniteLoss("train_stage: loss " + std::to_string(loss.value) +
                                    " at epoch " + std::to_string(epoch + 1) + ", batch " +
                                    std::to_string(start / cfg.batch_size + 1));
            }
            net.backward(loss.grad);
            net.step();
            loss_sum += loss.value * static_cast<double>(count);
        }
        history.push_back(loss_sum / static_cast<double>(n));
    }
    return history;
}

ModelBundle train_pipeline(const std::vector<BinaryMask>& shapes,
                           const std::vector<BinaryMask>& skeletons,
                           const UNetConfig& ucfg, const PipelineConfig& cfg,
                           TrainLog* log) {
    validate_unet_config(ucfg);
    validate_pipeline_config(cfg);
    if (shapes.size() != skeletons.size()) {
        throw DimensionMismatch("train_pipeline: " + std::to_string(shapes.size()) +
                                " shapes vs " + std::to_string(skeletons.size()) +
                                " skeletons");
    }

    ModelBundle bundle{ucfg, cfg, {}};
    std::vector<BinaryMask> stage_inputs = shapes;
    for (std::uint32_t k = 0; k < cfg.n_stages; ++k) {
        UNet<float> net(ucfg, stage_net_seed(cfg.seed, k));
        PipelineConfig stage_cfg = cfg;
        stage_cfg.seed = stage_shuffle_seed(cfg.seed, k);
        if (log) log->stage_inputs.push_back(stage_inputs);
        std::vector<double> losses = train_stage(net, stage_inputs, skeletons, stage_cfg);
        if (log) log->epoch_loss.push_back(std::move(losses));
        bundle.stages.push_back(std::move(net));
        if (k + 1 < cfg.n_stages) {
            stage_inputs = apply_stage(bundle.stages.back(), stage_inputs, cfg.batch_size);
        }
    }
    return bundle;
}

std::vector<BinaryMask> infer_batch(const ModelBundle& bundle,
                                    const std::vector<BinaryMask>& shapes,
                                    std::uint32_t n_stages) {
    check_sample_dims(shapes, bundle.unet.input_size, "infer input");
    const std::size_t stages =
        std::min<std::size_t>(n_stages, bundle.stages.size());
    std::vector<BinaryMask> cur = shapes;
    for (std::size_t k = 0; k < stages; ++k) {
        cur = apply_stage(bundle.stages[k], cur, bundle.pipeline.batch_size);
    }
    return cur;
}

BinaryMask infer(const ModelBundle& bundle, const BinaryMask& shape) {
    return infer_batch(bundle, {shape})[0];
}

namespace {

constexpr std::uint32_t kFormatVersion = 1;
const char kMagic[4] = {'S', 'K', 'L', 'B'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32_array(std::vector<unsigned char>& out, const float* p, std::size_t count) {
    static_assert(sizeof(float) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        const std::size_t at = out.size();
        out.resize(at + count * 4);
        std::memcpy(out.data() + at, p, count * 4);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u;
            std::memcpy(&u, p + i, 4);
            put_u32(out, u);
        }
    }
}

std::string loss_mode_name(LossMode mode) {
    return mode == LossMode::Literal ? "literal" : "standard_wcce";
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "literal") return LossMode::Literal;
    if (name == "standard_wcce") return LossMode::StandardWCCE;
    throw ModelFileError("model file: unknown loss mode '" + name + "'");
}

std::string config_blob(const ModelBundle& bundle) {
    const nlohmann::json j = {
        {"unet",
         {{"depth", bundle.unet.depth},
          {"base_channels", bundle.unet.base_channels},
          {"input_size", bundle.unet.input_size}}},
        {"pipeline",
         {{"n_stages", bundle.pipeline.n_stages},
          {"epochs", bundle.pipeline.epochs},
          {"batch_size", bundle.pipeline.batch_size},
          {"lr", bundle.pipeline.adam.lr},
          {"beta1", bundle.pipeline.adam.beta1},
          {"beta2", bundle.pipeline.adam.beta2},
          {"eps", bundle.pipeline.adam.eps},
          {"w0", bundle.pipeline.loss.w0},
          {"w1", bundle.pipeline.loss.w1},
          {"loss_mode", loss_mode_name(bundle.pipeline.loss.mode)},
          {"seed", bundle.pipeline.seed}}},
    };
    return j.dump();
}

void parse_config_blob(const std::string& blob, UNetConfig& ucfg, PipelineConfig& pcfg) {
    try {
        const nlohmann::json j = nlohmann::json::parse(blob);
        const nlohmann::json& u = j.at("unet");
        ucfg.depth = u.at("depth").get<std::uint32_t>();
        ucfg.base_channels = u.at("base_channels").get<std::uint32_t>();
        ucfg.input_size = u.at("input_size").get<std::uint32_t>();
        const nlohmann::json& p = j.at("pipeline");
        pcfg.n_stages = p.at("n_stages").get<std::uint32_t>();
        pcfg.epochs = p.at("epochs").get<std::uint32_t>();
        pcfg.batch_size = p.at("batch_size").get<std::uint32_t>();
        pcfg.adam.lr = p.at("lr").get<double>();
        pcfg.adam.beta1 = p.at("beta1").get<double>();
        pcfg.adam.beta2 = p.at("beta2").get<double>();
        pcfg.adam.eps = p.at("eps").get<double>();
        pcfg.loss.w0 = p.at("w0").get<double>();
        pcfg.loss.w1 = p.at("w1").get<double>();
        pcfg.loss.mode = loss_mode_from_name(p.at("loss_mode").get<std::string>());
        pcfg.seed = p.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelFileError(std::string("model file: bad config blob: ") + e.what());
    }
}

struct Cursor {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k, const char* what) {
        if (k > n - off) throw ModelFileError(std::string("model file truncated in ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        const std::uint32_t v = static_cast<std::uint32_t>(p[off]) |
                                (static_cast<std::uint32_t>(p[off + 1]) << 8) |
                                (static_cast<std::uint32_t>(p[off + 2]) << 16) |
                                (static_cast<std::uint32_t>(p[off + 3]) << 24);
        off += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        const std::uint64_t lo = u32(what);
        return lo | (static_cast<std::uint64_t>(u32(what)) << 32);
    }
    std::string str(std::size_t len, const char* what) {
        need(len, what);
        std::string s(reinterpret_cast<const char*>(p + off), len);
        off += len;
        return s;
    }
    void f32_array(float* dst, std::size_t count, const char* what) {
        need(count * 4, what);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(dst, p + off, count * 4);
            off += count * 4;
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                const std::uint32_t u = u32(what);
                std::memcpy(dst + i, &u, 4);
            }
        }
    }
};

} // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
    if (bundle.stages.size() != bundle.pipeline.n_stages) {
        throw InvalidConfig("save_model: " + std::to_string(bundle.stages.size()) +
                            " stages vs configured " +
                            std::to_string(bundle.pipeline.n_stages));
    }
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(bundle.stages.size()));
    const std::string blob = config_blob(bundle);
    put_u64(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
    for (const UNet<float>& stage : bundle.stages) {
        // params() needs mutable refs for training; serialization only reads
        std::vector<ParamRef<float>> params = const_cast<UNet<float>&>(stage).params();
        put_u32(out, static_cast<std::uint32_t>(params.size()));
        for (const ParamRef<float>& t : params) {
            put_u32(out, static_cast<std::uint32_t>(t.name.size()));
            out.insert(out.end(), t.name.begin(), t.name.end());
            put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
            for (std::uint32_t d : t.dims) put_u32(out, d);
            put_f32_array(out, t.value->data(), t.value->size());
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_model: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("save_model: write failed for " + path);
}

ModelBundle load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_model: cannot open " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    Cursor cur{raw.data(), raw.size()};

    const std::string magic = cur.str(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw BadMagic("load_model: bad magic in " + path);
    }
    const std::uint32_t version = cur.u32("version");
    if (version != kFormatVersion) {
        throw ModelFileError("load_model: unsupported format version " +
                             std::to_string(version));
    }
    const std::uint32_t stage_count = cur.u32("stage count");
    const std::uint64_t blob_len = cur.u64("config length");
    const std::string blob = cur.str(static_cast<std::size_t>(blob_len), "config blob");

    ModelBundle bundle;
    parse_config_blob(blob, bundle.unet, bundle.pipeline);
    validate_unet_config(bundle.unet);
    validate_pipeline_config(bundle.pipeline);
    if (stage_count != bundle.pipeline.n_stages) {
        throw ModelFileError("load_model: " + std::to_string(stage_count) +
                             " stages vs configured " +
                             std::to_string(bundle.pipeline.n_stages));
    }

    for (std::uint32_t k = 0; k < stage_count; ++k) {
        UNet<float> net(bundle.unet, 0);
        std::vector<ParamRef<float>> params = net.params();
        const std::uint32_t tensor_count = cur.u32("tensor count");
        if (tensor_count != params.size()) {
            throw ModelFileError("load_model: stage " + std::to_string(k) + " has " +
                                 std::to_string(tensor_count) + " tensors, expected " +
                                 std::to_string(params.size()));
        }
        for (ParamRef<float>& t : params) {
            const std::uint32_t name_len = cur.u32("tensor name length");
            const std::string name = cur.str(name_len, "tensor name");
            if (name != t.name) {
                throw ModelFileError("load_model: tensor '" + name + "', expected '" +
                                     t.name + "'");
            }
            const std::uint32_t ndim = cur.u32("tensor rank");
            if (ndim != t.dims.size()) {
                throw ModelFileError("load_model: tensor '" + name + "' rank mismatch");
            }
            for (std::size_t d = 0; d < ndim; ++d) {
                if (cur.u32("tensor dims") != t.dims[d]) {
                    throw ModelFileError("load_model: tensor '" + name + "' dim mismatch");
                }
            }
            cur.f32_array(t.value->data(), t.value->size(), "tensor data");
            for (float v : *t.value) {
                if (!std::isfinite(v)) {
                    throw ModelFileError("load_model: non-finite value in '" + name + "'");
                }
            }
        }
        bundle.stages.push_back(std::move(net));
    }
    if (cur.off != raw.size()) {
        throw ModelFileError("load_model: trailing bytes in " + path);
    }
    return bundle;
}

} // namespace skelbench
