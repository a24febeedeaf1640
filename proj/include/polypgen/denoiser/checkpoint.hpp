#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polypgen/denoiser/denoiser.hpp"
#include "polypgen/diffusion/schedule.hpp"

namespace polypgen::denoiser {

enum class ModelKind { mask_model, image_model };

std::string_view model_kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// Present when the model diffuses autoencoder latents instead of pixels.
struct LatentInfo {
    std::string autoencoder_digest;
    int factor = 4;
    int latent_channels = 4;
    double scale = 1.0;  // latents are multiplied by this before diffusion
    friend bool operator==(const LatentInfo&, const LatentInfo&) = default;
};

struct DenoiserCheckpoint {
    DenoiserArch arch;
    diffusion::DiffusionConfig diffusion;
    ModelKind kind = ModelKind::mask_model;
    int resolution = 0;  // spatial size of the diffused grid
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::optional<LatentInfo> latent;
    std::vector<float> parameters;

    Denoiser model() const { return Denoiser(arch, parameters); }
    /// Content digest of the serialized checkpoint.
    std::string digest() const;
};

inline constexpr std::string_view kDenoiserMagic = "PGDNCKPT";

void save_checkpoint(const DenoiserCheckpoint& ckpt, const std::filesystem::path& path);
DenoiserCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace polypgen::denoiser
