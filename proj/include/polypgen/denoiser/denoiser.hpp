#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "polypgen/diffusion/process.hpp"
#include "polypgen/nn/blocks.hpp"

namespace polypgen::denoiser {

struct DenoiserArch {
    int base_channels = 16;
    int depth = 2;
    int in_channels = 1;
    int cond_channels = 0;
    int embed_dim = 32;

    void validate() const;
    int channels_at(int level) const { return base_channels << level; }
    int time_dim() const { return 4 * base_channels; }
    friend bool operator==(const DenoiserArch&, const DenoiserArch&) = default;
};

void to_json(nlohmann::json& j, const DenoiserArch& a);
void from_json(const nlohmann::json& j, DenoiserArch& a);

/// Sinusoidal embedding: sin(t·ω_i) for the first half, cos(t·ω_i) for the
/// second, ω_i = 10000^(−2i/dim).
std::vector<double> timestep_embedding(int t, int dim);

/// U-Net-style noise predictor: stem, `depth` encoder levels with stride-2
/// downsampling, a middle block, and a mirrored decoder with skip
/// concatenation. Every block receives the timestep embedding.
template <class T>
class DenoiserNet {
public:
    using Var = typename nn::Graph<T>::Var;

    explicit DenoiserNet(const DenoiserArch& arch);

    const DenoiserArch& arch() const noexcept { return arch_; }
    nn::ParamStore<T>& params() noexcept { return params_; }
    const nn::ParamStore<T>& params() const noexcept { return params_; }

    /// x: [in_channels, n, h, w]; cond: [cond_channels, n, h, w] or -1.
    Var forward(nn::Graph<T>& g, Var x, Var cond, std::span<const int> timesteps) const;

private:
    DenoiserArch arch_;
    nn::ParamStore<T> params_;
    nn::Linear time1_;
    nn::Linear time2_;
    nn::Conv2d stem_;
    std::vector<nn::ResBlock> enc_;
    std::vector<nn::Conv2d> down_;
    nn::ResBlock mid_;
    std::vector<nn::ResBlock> dec_;
    nn::Conv2d head_;
};

/// Inference wrapper over float parameters; implements the noise-predictor
/// interface the diffusion process samples from. Forward passes are run in
/// chunks of `max_batch` and never mutate the model.
class Denoiser final : public diffusion::NoisePredictor {
public:
    Denoiser(const DenoiserArch& arch, std::span<const float> parameters);

    bool conditional() const override { return net_.arch().cond_channels > 0; }
    std::vector<ImageTensor> predict(std::span<const ImageTensor> x_t, int t,
                                     std::span<const ImageTensor> conds) const override;

    const DenoiserArch& arch() const noexcept { return net_.arch(); }
    std::span<const float> parameters() const noexcept { return net_.params().values(); }

    std::size_t max_batch = 32;

private:
    DenoiserNet<float> net_;
};

/// Seeded initialization; the same (arch, seed) always yields the same parameters.
Denoiser init_denoiser(const DenoiserArch& arch, std::uint64_t seed);

}  // namespace polypgen::denoiser
