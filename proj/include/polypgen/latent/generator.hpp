#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "polypgen/denoiser/train.hpp"
#include "polypgen/latent/autoencoder.hpp"

// One sampling interface for both diffusion substrates. Callers pick pixel or
// latent mode through the checkpoint; everything downstream only sees pixel
// outputs in [-1, 1] at the data resolution.
namespace polypgen::latent {

class Generator {
public:
    virtual ~Generator() = default;

    virtual denoiser::ModelKind kind() const = 0;
    virtual bool latent_mode() const = 0;
    /// Pixel-space output shape.
    virtual int channels() const = 0;
    virtual int resolution() const = 0;
    /// Content digest identifying the generator (denoiser plus autoencoder).
    virtual std::string digest() const = 0;

    /// One sample per seed. Image models take one conditioning mask per seed
    /// at the pixel resolution; mask models take none.
    virtual std::vector<ImageTensor> sample(std::span<const BinaryMask> masks,
                                            std::span<const std::uint64_t> seeds) const = 0;
};

class PixelGenerator final : public Generator {
public:
    explicit PixelGenerator(denoiser::DenoiserCheckpoint ckpt);

    denoiser::ModelKind kind() const override { return ckpt_.kind; }
    bool latent_mode() const override { return false; }
    int channels() const override { return ckpt_.arch.in_channels; }
    int resolution() const override { return ckpt_.resolution; }
    std::string digest() const override { return digest_; }
    std::vector<ImageTensor> sample(std::span<const BinaryMask> masks,
                                    std::span<const std::uint64_t> seeds) const override;

private:
    denoiser::DenoiserCheckpoint ckpt_;
    denoiser::Denoiser model_;
    std::string digest_;
};

class LatentGenerator final : public Generator {
public:
    /// The checkpoint must carry latent info naming this autoencoder.
    LatentGenerator(denoiser::DenoiserCheckpoint ckpt, Autoencoder ae);

    denoiser::ModelKind kind() const override { return ckpt_.kind; }
    bool latent_mode() const override { return true; }
    int channels() const override { return ae_.arch().in_channels; }
    int resolution() const override { return ckpt_.resolution * ae_.arch().factor; }
    std::string digest() const override { return digest_; }
    std::vector<ImageTensor> sample(std::span<const BinaryMask> masks,
                                    std::span<const std::uint64_t> seeds) const override;

private:
    denoiser::DenoiserCheckpoint ckpt_;
    denoiser::Denoiser model_;
    Autoencoder ae_;
    std::string digest_;
};

/// Latent checkpoints require `ae`; pixel checkpoints ignore it.
std::unique_ptr<Generator> make_generator(const denoiser::DenoiserCheckpoint& ckpt,
                                          const std::optional<Autoencoder>& ae = std::nullopt);

/// Latent-space training examples: x0 = scale·encode(item), condition =
/// downsample_condition(mask, f) for image models.
std::vector<denoiser::DiffusionExample> make_latent_examples(const data::PairedDataset& ds, denoiser::ModelKind kind,
                                                             const Autoencoder& ae);

/// train_denoiser on latent examples; every returned checkpoint records the
/// autoencoder it depends on.
denoiser::TrainResult train_latent_denoiser(const data::PairedDataset& ds, denoiser::ModelKind kind,
                                            const Autoencoder& ae, const diffusion::DiffusionConfig& dcfg,
                                            const denoiser::TrainConfig& tcfg, denoiser::DenoiserArch arch,
                                            const denoiser::StepCallback& on_step = {});

}  // namespace polypgen::latent
