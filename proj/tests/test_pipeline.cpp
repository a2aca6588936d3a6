#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "skelbench/grad_check.hpp"
#include "skelbench/metrics.hpp"
#include "skelbench/pipeline.hpp"
#include "skelbench/thinning.hpp"

using namespace skelbench;

namespace {

BinaryMask ellipse_mask(std::uint32_t size, double cy, double cx, double ry, double rx) {
    BinaryMask m(size, size);
    for (std::uint32_t r = 0; r < size; ++r) {
        for (std::uint32_t c = 0; c < size; ++c) {
            const double dy = (r - cy) / ry;
            const double dx = (c - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) m.set(r, c, true);
        }
    }
    return m;
}

BinaryMask random_mask(std::uint32_t size, std::uint64_t seed, double density) {
    Rng rng(seed);
    BinaryMask m(size, size);
    for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
    return m;
}

template <typename T>
bool same_weights(UNet<T>& a, UNet<T>& b) {
    auto pa = a.params();
    auto pb = b.params();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i].name != pb[i].name || pa[i].dims != pb[i].dims) return false;
        if (*pa[i].value != *pb[i].value) return false;
    }
    return true;
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    return std::vector<char>((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
}

std::filesystem::path temp_model_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "skelbench_models";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::filesystem::path write_temp(const std::vector<char>& bytes, const std::string& name) {
    const auto p = temp_model_path(name);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return p;
}

} // namespace

TEST_CASE("unet: config validation") {
    CHECK_THROWS_AS(build_unet<float>({0, 4, 16}, 1), InvalidConfig);
    CHECK_THROWS_AS(build_unet<float>({2, 0, 16}, 1), InvalidConfig);
    CHECK_THROWS_AS(build_unet<float>({2, 4, 0}, 1), InvalidConfig);
    CHECK_THROWS_AS(build_unet<float>({3, 4, 20}, 1), InvalidConfig);
    CHECK_NOTHROW(build_unet<float>({3, 4, 24}, 1));
}

TEST_CASE("unet: parameter registry for depth 1, base 4") {
    UNet<float> net = build_unet<float>({1, 4, 8}, 0);
    auto ps = net.params();
    const std::vector<std::string> expect = {
        "enc0.conv1.w", "enc0.conv1.b", "enc0.conv2.w", "enc0.conv2.b",
        "bottleneck.conv1.w", "bottleneck.conv1.b", "bottleneck.conv2.w",
        "bottleneck.conv2.b", "dec0.tconv.w", "dec0.conv1.w", "dec0.conv1.b",
        "dec0.conv2.w", "dec0.conv2.b", "head.w", "head.b"};
    REQUIRE(ps.size() == expect.size());
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i].name == expect[i]);
    // concat at the junction doubles the decoder conv input channels
    CHECK(ps[9].dims == std::vector<std::uint32_t>{4, 8, 3, 3});
    CHECK(ps[8].dims == std::vector<std::uint32_t>{8, 4, 2, 2});
    CHECK(net.param_count() == 1646);

    Rng rng(5);
    Tensor4<float> x(2, 1, 8, 8);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform());
    const Tensor4<float>& probs = net.forward(x);
    CHECK(probs.n == 2);
    CHECK(probs.c == 2);
    CHECK(probs.h == 8);
    CHECK(probs.w == 8);
}

TEST_CASE("unet: all-zeros input yields valid probabilities") {
    UNet<float> net = build_unet<float>({2, 4, 16}, 11);
    const Tensor4<float>& probs = net.forward(Tensor4<float>(1, 1, 16, 16));
    for (std::uint32_t r = 0; r < 16; ++r) {
        for (std::uint32_t c = 0; c < 16; ++c) {
            const double p0 = probs.at(0, 0, r, c);
            const double p1 = probs.at(0, 1, r, c);
            CHECK(p0 > 0.0);
            CHECK(p1 > 0.0);
            CHECK(std::fabs(p0 + p1 - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("unet: seeded build determinism") {
    UNet<float> a = build_unet<float>({2, 4, 16}, 21);
    UNet<float> b = build_unet<float>({2, 4, 16}, 21);
    UNet<float> c = build_unet<float>({2, 4, 16}, 22);
    CHECK(same_weights(a, b));
    CHECK(!same_weights(a, c));
    CHECK(a.param_count() == c.param_count());
}

TEST_CASE("unet: forward rejects wrong shapes") {
    UNet<float> net = build_unet<float>({1, 2, 8}, 1);
    CHECK_THROWS_AS(net.forward(Tensor4<float>(1, 1, 16, 16)), ShapeMismatch);
    CHECK_THROWS_AS(net.forward(Tensor4<float>(1, 2, 8, 8)), ShapeMismatch);
    CHECK_THROWS_AS(net.forward_nograd(Tensor4<float>(1, 1, 4, 4)), ShapeMismatch);
}

TEST_CASE("unet: shape conservation across depths and sizes") {
    for (std::uint32_t depth : {1u, 2u, 3u}) {
        for (std::uint32_t size : {16u, 32u, 64u}) {
            UNet<float> net = build_unet<float>({depth, 2, size}, 7);
            const Tensor4<float>& probs = net.forward(Tensor4<float>(1, 1, size, size));
            REQUIRE(probs.c == 2);
            REQUIRE(probs.h == size);
            REQUIRE(probs.w == size);
            CHECK(std::fabs(probs.at(0, 0, size / 2, size / 2) +
                            probs.at(0, 1, size / 2, size / 2) - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("unet: end-to-end gradient check") {
    UNet<double> net = build_unet<double>({1, 2, 8}, 3);
    Rng rng(11);
    // zero-init biases park empty receptive fields exactly on the relu kink,
    // where central differences see half the slope; check at a generic point
    for (ParamRef<double>& p : net.params()) {
        for (double& v : *p.value) v += rng.uniform(-0.05, 0.05);
    }
    Tensor4<double> x(2, 1, 8, 8);
    for (auto& v : x.data) v = rng.uniform(0.1, 1.0);
    const std::vector<BinaryMask> targets{random_mask(8, 61, 0.2), random_mask(8, 62, 0.2)};
    const LossConfig lc;

    net.forward(x);
    const WeightedLossResult<double> wl = weighted_loss(net.probs(), targets, lc);
    net.backward(wl.grad);

    const auto loss_value = [&]() {
        return weighted_loss(net.forward_nograd(x), targets, lc).value;
    };
    double worst = 0.0;
    for (ParamRef<double>& p : net.params()) {
        const GradCheckResult r =
            grad_check(p.value->data(), p.value->size(), p.grad->data(), loss_value);
        CAPTURE(p.name);
        CHECK(r.max_rel_err < 1e-3);
        worst = std::max(worst, r.max_rel_err);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("train_stage: zero epochs leaves the net untouched") {
    UNet<float> net = build_unet<float>({1, 2, 16}, 3);
    UNet<float> before = net;
    PipelineConfig cfg;
    cfg.epochs = 0;
    std::vector<BinaryMask> in{random_mask(16, 7, 0.5)};
    std::vector<BinaryMask> tg{random_mask(16, 8, 0.2)};
    CHECK(train_stage(net, in, tg, cfg).empty());
    CHECK(same_weights(net, before));
}

TEST_CASE("train_stage: input validation") {
    UNet<float> net = build_unet<float>({1, 2, 16}, 3);
    PipelineConfig cfg;
    cfg.epochs = 1;
    std::vector<BinaryMask> none;
    std::vector<BinaryMask> one{random_mask(16, 1, 0.5)};
    std::vector<BinaryMask> two{random_mask(16, 1, 0.5), random_mask(16, 2, 0.5)};
    std::vector<BinaryMask> small{random_mask(8, 1, 0.5)};
    CHECK_THROWS_AS(train_stage(net, none, none, cfg), EmptyDataset);
    CHECK_THROWS_AS(train_stage(net, one, two, cfg), DimensionMismatch);
    CHECK_THROWS_AS(train_stage(net, small, small, cfg), DimensionMismatch);
    PipelineConfig bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_stage(net, one, one, bad), InvalidConfig);
}

TEST_CASE("train_stage: non-finite loss aborts") {
    UNet<float> net = build_unet<float>({1, 2, 16}, 4);
    auto ps = net.params();
    (*ps.back().value)[0] = std::numeric_limits<float>::infinity(); // head bias
    PipelineConfig cfg;
    cfg.epochs = 1;
    std::vector<BinaryMask> in{random_mask(16, 2, 0.4)};
    std::vector<BinaryMask> tg{random_mask(16, 3, 0.1)};
    CHECK_THROWS_AS(train_stage(net, in, tg, cfg), NonFiniteLoss);
}

TEST_CASE("train_stage: seeded determinism") {
    std::vector<BinaryMask> in, tg;
    for (int i = 0; i < 6; ++i) {
        in.push_back(random_mask(16, 40 + i, 0.5));
        tg.push_back(random_mask(16, 50 + i, 0.15));
    }
    PipelineConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 123;
    UNet<float> n1 = build_unet<float>({1, 2, 16}, 8);
    UNet<float> n2 = build_unet<float>({1, 2, 16}, 8);
    const std::vector<double> h1 = train_stage(n1, in, tg, cfg);
    const std::vector<double> h2 = train_stage(n2, in, tg, cfg);
    REQUIRE(h1.size() == 3);
    CHECK(h1 == h2);
    CHECK(same_weights(n1, n2));
}

TEST_CASE("train_stage: overfits a single repeated sample") {
    const std::uint32_t size = 64;
    const BinaryMask shape = ellipse_mask(size, 31.5, 31.5, 12.0, 24.0);
    const BinaryMask target = skeletonize(shape, {ThinningVariant::ZhangSuen, 8});
    REQUIRE(!target.empty_mask());

    const UNetConfig ucfg{2, 8, size};
    PipelineConfig cfg;
    cfg.epochs = 25;
    cfg.seed = 5;
    const std::vector<BinaryMask> inputs(8, shape);
    const std::vector<BinaryMask> targets(8, target);

    UNet<float> net = build_unet<float>(ucfg, 99);
    std::vector<double> losses = train_stage(net, inputs, targets, cfg);
    auto more = train_stage(net, inputs, targets, cfg);
    losses.insert(losses.end(), more.begin(), more.end());
    CHECK(losses[49] < losses[0]);

    ModelBundle probe{ucfg, cfg, {}};
    double f1 = 0.0;
    std::uint32_t epochs_done = 50;
    for (;;) {
        probe.stages.assign(1, net);
        f1 = f1_score(target, infer(probe, shape));
        if (f1 >= 0.9 || epochs_done >= 200) break;
        more = train_stage(net, inputs, targets, cfg);
        losses.insert(losses.end(), more.begin(), more.end());
        epochs_done += cfg.epochs;
    }
    CAPTURE(epochs_done);
    CHECK(f1 >= 0.9);
}

TEST_CASE("train_pipeline: one stage reduces to train_stage") {
    const UNetConfig ucfg{1, 2, 16};
    std::vector<BinaryMask> shapes, skels;
    for (int i = 0; i < 5; ++i) {
        shapes.push_back(random_mask(16, 60 + i, 0.5));
        skels.push_back(random_mask(16, 70 + i, 0.15));
    }
    PipelineConfig cfg;
    cfg.n_stages = 1;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.seed = 31;
    TrainLog log;
    ModelBundle bundle = train_pipeline(shapes, skels, ucfg, cfg, &log);

    UNet<float> manual = build_unet<float>(ucfg, stage_net_seed(cfg.seed, 0));
    PipelineConfig scfg = cfg;
    scfg.seed = stage_shuffle_seed(cfg.seed, 0);
    const std::vector<double> hist = train_stage(manual, shapes, skels, scfg);

    REQUIRE(bundle.stages.size() == 1);
    CHECK(same_weights(bundle.stages[0], manual));
    REQUIRE(log.epoch_loss.size() == 1);
    CHECK(log.epoch_loss[0] == hist);
    REQUIRE(log.stage_inputs.size() == 1);
    CHECK(log.stage_inputs[0] == shapes);
}

TEST_CASE("train_pipeline: later stages train on frozen prefix outputs") {
    const UNetConfig ucfg{1, 2, 16};
    std::vector<BinaryMask> shapes, skels;
    for (int i = 0; i < 5; ++i) {
        shapes.push_back(random_mask(16, 80 + i, 0.5));
        skels.push_back(random_mask(16, 90 + i, 0.15));
    }
    PipelineConfig cfg;
    cfg.n_stages = 2;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.seed = 31;
    TrainLog log;
    ModelBundle two = train_pipeline(shapes, skels, ucfg, cfg, &log);
    REQUIRE(two.stages.size() == 2);
    REQUIRE(log.stage_inputs.size() == 2);
    CHECK(log.stage_inputs[1] == infer_batch(two, shapes, 1));

    PipelineConfig one_cfg = cfg;
    one_cfg.n_stages = 1;
    ModelBundle one = train_pipeline(shapes, skels, ucfg, one_cfg);
    CHECK(same_weights(one.stages[0], two.stages[0]));

    PipelineConfig three_cfg = cfg;
    three_cfg.n_stages = 3;
    ModelBundle three = train_pipeline(shapes, skels, ucfg, three_cfg);
    REQUIRE(three.stages.size() == 3);
    CHECK(same_weights(three.stages[0], two.stages[0]));
    CHECK(same_weights(three.stages[1], two.stages[1]));
    CHECK(infer(three, shapes[0]).width == 16);
}

TEST_CASE("infer: deterministic, pure, and size-checked") {
    const UNetConfig ucfg{1, 2, 16};
    PipelineConfig cfg;
    cfg.n_stages = 1;
    cfg.epochs = 0;
    cfg.seed = 9;
    std::vector<BinaryMask> shapes{random_mask(16, 1, 0.5)};
    std::vector<BinaryMask> skels{random_mask(16, 2, 0.1)};
    ModelBundle a = train_pipeline(shapes, skels, ucfg, cfg);
    ModelBundle b = train_pipeline(shapes, skels, ucfg, cfg);
    const BinaryMask probe = random_mask(16, 3, 0.4);
    const BinaryMask m1 = infer(a, probe);
    CHECK(m1 == infer(a, probe));
    CHECK(m1 == infer(b, probe));
    CHECK(m1.width == 16);
    CHECK(m1.height == 16);
    CHECK_THROWS_AS(infer(a, random_mask(8, 3, 0.4)), DimensionMismatch);
}

TEST_CASE("train_pipeline: fixed seed gives identical bundle bytes") {
    const UNetConfig ucfg{1, 2, 16};
    std::vector<BinaryMask> shapes, skels;
    for (int i = 0; i < 3; ++i) {
        shapes.push_back(random_mask(16, 200 + i, 0.5));
        skels.push_back(random_mask(16, 210 + i, 0.15));
    }
    PipelineConfig cfg;
    cfg.n_stages = 2;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.seed = 77;
    ModelBundle a = train_pipeline(shapes, skels, ucfg, cfg);
    ModelBundle b = train_pipeline(shapes, skels, ucfg, cfg);
    const auto pa = temp_model_path("det_a.sklb");
    const auto pb = temp_model_path("det_b.sklb");
    save_model(a, pa.string());
    save_model(b, pb.string());
    CHECK(slurp(pa) == slurp(pb));
}

TEST_CASE("model file: round trip is byte-exact and inference-equivalent") {
    const UNetConfig ucfg{1, 2, 16};
    std::vector<BinaryMask> shapes, skels;
    for (int i = 0; i < 4; ++i) {
        shapes.push_back(random_mask(16, 10 + i, 0.5));
        skels.push_back(random_mask(16, 20 + i, 0.1));
    }
    PipelineConfig cfg;
    cfg.n_stages = 2;
    cfg.epochs = 1;
    cfg.batch_size = 3;
    cfg.seed = 7;
    ModelBundle bundle = train_pipeline(shapes, skels, ucfg, cfg);

    const auto pa = temp_model_path("round_a.sklb");
    const auto pb = temp_model_path("round_b.sklb");
    save_model(bundle, pa.string());
    ModelBundle loaded = load_model(pa.string());
    CHECK(loaded.unet.depth == ucfg.depth);
    CHECK(loaded.unet.base_channels == ucfg.base_channels);
    CHECK(loaded.unet.input_size == ucfg.input_size);
    CHECK(loaded.pipeline.n_stages == cfg.n_stages);
    CHECK(loaded.pipeline.epochs == cfg.epochs);
    CHECK(loaded.pipeline.batch_size == cfg.batch_size);
    CHECK(loaded.pipeline.seed == cfg.seed);
    CHECK(loaded.pipeline.adam.lr == cfg.adam.lr);
    CHECK(loaded.pipeline.loss.w1 == cfg.loss.w1);
    REQUIRE(loaded.stages.size() == 2);
    CHECK(same_weights(loaded.stages[0], bundle.stages[0]));
    CHECK(same_weights(loaded.stages[1], bundle.stages[1]));
    save_model(loaded, pb.string());
    CHECK(slurp(pa) == slurp(pb));

    std::vector<BinaryMask> probes;
    for (int i = 0; i < 10; ++i) probes.push_back(random_mask(16, 100 + i, 0.4));
    CHECK(infer_batch(bundle, probes) == infer_batch(loaded, probes));
}

TEST_CASE("model file: corruption is rejected") {
    const UNetConfig ucfg{1, 2, 16};
    PipelineConfig cfg;
    cfg.n_stages = 1;
    cfg.epochs = 0;
    std::vector<BinaryMask> shapes{random_mask(16, 1, 0.5)};
    std::vector<BinaryMask> skels{random_mask(16, 2, 0.1)};
    const ModelBundle bundle = train_pipeline(shapes, skels, ucfg, cfg);
    const auto path = temp_model_path("corrupt_base.sklb");
    save_model(bundle, path.string());
    const std::vector<char> bytes = slurp(path);

    std::vector<char> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(load_model(write_temp(bad, "bad_magic.sklb").string()), BadMagic);

    bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_AS(load_model(write_temp(bad, "bad_version.sklb").string()),
                    ModelFileError);

    bad.assign(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_AS(load_model(write_temp(bad, "truncated.sklb").string()),
                    ModelFileError);

    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(load_model(write_temp(bad, "trailing.sklb").string()),
                    ModelFileError);

    CHECK_THROWS_AS(load_model((temp_model_path("no_such_dir") / "x.sklb").string()),
                    IoError);
}
