#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelbench/image.hpp"
#include "skelbench/unet.hpp"

namespace skelbench {

struct PipelineConfig {
    std::uint32_t n_stages = 1;
    std::uint32_t epochs = 20;
    std::uint32_t batch_size = 32;
    AdamConfig adam;
    LossConfig loss;
    std::uint64_t seed = 0;
};

inline void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.n_stages < 1) throw InvalidConfig("pipeline: n_stages must be at least 1");
    if (cfg.batch_size < 1) throw InvalidConfig("pipeline: batch_size must be at least 1");
    check_loss_config(cfg.loss);
}

struct ModelBundle {
    UNetConfig unet;
    PipelineConfig pipeline;
    std::vector<UNet<float>> stages;
};

// Seed streams for stage k. Depending only on (seed, k) makes an n-stage run
// an exact prefix of any longer run with the same seed.
inline std::uint64_t stage_net_seed(std::uint64_t seed, std::uint32_t stage) {
    return mix_seed(seed, 2ull * stage);
}
inline std::uint64_t stage_shuffle_seed(std::uint64_t seed, std::uint32_t stage) {
    return mix_seed(seed, 2ull * stage + 1);
}

// Trains in place over epochs x ceil(N/batch) Adam steps with seeded shuffles
// (cfg.seed drives the shuffle stream). Returns the per-epoch mean loss.
std::vector<double> train_stage(UNet<float>& net, const std::vector<BinaryMask>& inputs,
                                const std::vector<BinaryMask>& targets,
                                const PipelineConfig& cfg);

struct TrainLog {
    std::vector<std::vector<double>> epoch_loss;       // [stage][epoch]
    std::vector<std::vector<BinaryMask>> stage_inputs; // what each stage trained on
};

// Stage 1 trains on (shapes -> skeletons); stage k >= 2 on the binarized
// outputs of the frozen prefix applied to the training shapes, same targets.
ModelBundle train_pipeline(const std::vector<BinaryMask>& shapes,
                           const std::vector<BinaryMask>& skeletons,
                           const UNetConfig& ucfg, const PipelineConfig& cfg,
                           TrainLog* log = nullptr);

// Runs the first n_stages stages (all by default), binarizing between stages
// and at the end by per-pixel argmax; the skeleton channel wins ties.
std::vector<BinaryMask> infer_batch(const ModelBundle& bundle,
                                    const std::vector<BinaryMask>& shapes,
                                    std::uint32_t n_stages = UINT32_MAX);

BinaryMask infer(const ModelBundle& bundle, const BinaryMask& shape);

// Little-endian container: magic "SKLB", version, stage count, JSON config
// blob, then per stage the named weight tensors in registry order.
void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

} // namespace skelbench
