#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "polypgen/data/dataset.hpp"
#include "polypgen/nn/graph.hpp"

namespace polypgen::latent {

/// Latent grids share the image container; shape is
/// [latent_channels × H/f × W/f] and values are unbounded.
using LatentTensor = ImageTensor;

struct AutoencoderArch {
    int in_channels = 3;
    int factor = 4;  // power of two
    int latent_channels = 4;
    int base_channels = 16;

    void validate() const;
    int levels() const;
    friend bool operator==(const AutoencoderArch&, const AutoencoderArch&) = default;
};

void to_json(nlohmann::json& j, const AutoencoderArch& a);
void from_json(const nlohmann::json& j, AutoencoderArch& a);

/// Encoder: stem, log2(f) stride-2 stages, a projection to the latent
/// channels. Decoder mirrors it with nearest upsampling.
template <class T>
class AutoencoderNet {
public:
    using Var = typename nn::Graph<T>::Var;

    explicit AutoencoderNet(const AutoencoderArch& arch);

    const AutoencoderArch& arch() const noexcept { return arch_; }
    nn::ParamStore<T>& params() noexcept { return params_; }
    const nn::ParamStore<T>& params() const noexcept { return params_; }

    Var encode(nn::Graph<T>& g, Var x) const;
    /// Unclamped reconstruction.
    Var decode(nn::Graph<T>& g, Var z) const;

private:
    AutoencoderArch arch_;
    nn::ParamStore<T> params_;
    nn::Conv2d enc_stem_;
    std::vector<nn::Conv2d> enc_down_;
    std::vector<nn::GroupNorm> enc_norm_;
    nn::Conv2d enc_out_;
    nn::Conv2d dec_stem_;
    std::vector<nn::Conv2d> dec_up_;
    std::vector<nn::GroupNorm> dec_norm_;
    nn::Conv2d dec_out_;
};

struct AutoencoderCheckpoint {
    AutoencoderArch arch;
    int resolution = 0;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    /// Multiplier applied to latents before diffusion: 1 / max |z| over the
    /// training set, so scaled latents fit the sampler's [-1, 1] clamp.
    double latent_scale = 1.0;
    std::vector<float> parameters;

    std::string digest() const;
};

inline constexpr std::string_view kAutoencoderMagic = "PGAECKPT";

void save_autoencoder(const AutoencoderCheckpoint& ckpt, const std::filesystem::path& path);
AutoencoderCheckpoint load_autoencoder(const std::filesystem::path& path);

struct AETrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    std::int64_t total_steps = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AETrainResult {
    AutoencoderCheckpoint checkpoint;
    std::vector<double> loss_curve;
    double train_psnr = 0.0;  // dB, on the full training set
};

/// Minimises mean squared reconstruction error on the dataset images.
AETrainResult train_autoencoder(const data::PairedDataset& ds, const AutoencoderArch& arch, const AETrainConfig& cfg);
/// Same, on arbitrary same-shaped grids (e.g. signed masks).
AETrainResult train_autoencoder(std::span<const ImageTensor> items, const AutoencoderArch& arch,
                                const AETrainConfig& cfg);

/// Read-only inference wrapper.
class Autoencoder {
public:
    explicit Autoencoder(AutoencoderCheckpoint ckpt);

    const AutoencoderCheckpoint& checkpoint() const noexcept { return ckpt_; }
    const AutoencoderArch& arch() const noexcept { return ckpt_.arch; }
    std::string digest() const { return digest_; }

    /// Unscaled latent.
    LatentTensor encode(const ImageTensor& image) const;
    /// Reconstruction clamped to [-1, 1].
    ImageTensor decode(const LatentTensor& z) const;
    std::vector<LatentTensor> encode(std::span<const ImageTensor> images) const;
    std::vector<ImageTensor> decode(std::span<const LatentTensor> zs) const;

    std::size_t max_batch = 32;

private:
    AutoencoderCheckpoint ckpt_;
    AutoencoderNet<float> net_;
    std::string digest_;
};

/// 10·log10(4 / mse) for signals in [-1, 1].
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Area-average pooling by f: fraction of foreground per cell, in [0, 1].
ImageTensor pool_mask(const BinaryMask& mask, int factor);
/// pool_mask rescaled to [-1, 1]; the condition grid for latent-mode models.
ImageTensor downsample_condition(const BinaryMask& mask, int factor);

}  // namespace polypgen::latent
