#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "polypgen/data/dataset.hpp"
#include "polypgen/denoiser/checkpoint.hpp"
#include "polypgen/nn/adam.hpp"

namespace polypgen::denoiser {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    std::int64_t total_steps = 1000;
    std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double ema_decay = 0.99;

    void validate() const;
    nn::AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

/// One diffusion training example in network range: x0 plus an optional
/// condition grid at x0's spatial size.
struct DiffusionExample {
    ImageTensor x0;
    std::optional<ImageTensor> cond;
};

struct CurvePoint {
    std::int64_t step;
    double loss;
    double loss_ema;
};

struct TrainResult {
    std::vector<DenoiserCheckpoint> checkpoints;
    std::vector<CurvePoint> curve;
};

using StepCallback = std::function<void(const CurvePoint&)>;

/// Mean-squared ε-prediction loss over a packed batch; when `backward` is set
/// the parameter gradients of `net` are accumulated.
template <class T>
double denoiser_mse(DenoiserNet<T>& net, const nn::Tensor<T>& x_t, const nn::Tensor<T>* cond,
                    std::span<const int> timesteps, const nn::Tensor<T>& target, bool backward);

/// Adam on the ε-prediction loss with t ~ U{1..T}; fully determined by
/// (examples, arch, diffusion config, train config).
TrainResult train_denoiser(std::span<const DiffusionExample> examples, ModelKind kind, const DenoiserArch& arch,
                           const diffusion::DiffusionConfig& dcfg, const TrainConfig& tcfg,
                           const StepCallback& on_step = {});

/// Pixel-space examples: mask_model diffuses {-1,+1} masks unconditionally,
/// image_model diffuses images conditioned on the {-1,+1} mask.
std::vector<DiffusionExample> make_examples(const data::PairedDataset& ds, ModelKind kind);

/// Dataset front-end; fills in the input/condition channel counts of `arch`.
TrainResult train_denoiser(const data::PairedDataset& ds, ModelKind kind, const diffusion::DiffusionConfig& dcfg,
                           const TrainConfig& tcfg, DenoiserArch arch, const StepCallback& on_step = {});

void write_curve_csv(std::span<const CurvePoint> curve, const std::filesystem::path& path);

}  // namespace polypgen::denoiser
