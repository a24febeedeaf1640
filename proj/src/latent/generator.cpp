#include "polypgen/latent/generator.hpp"

#include "polypgen/io/digest.hpp"
#include "polypgen/seeding.hpp"

namespace polypgen::latent {

namespace {

using denoiser::ModelKind;

std::vector<diffusion::Rng> rngs_for(std::span<const std::uint64_t> seeds) {
    std::vector<diffusion::Rng> rngs;
    rngs.reserve(seeds.size());
    for (auto s : seeds) rngs.emplace_back(derive_seed(s, streams::sampling));
    return rngs;
}

void check_masks(ModelKind kind, std::span<const BinaryMask> masks, std::span<const std::uint64_t> seeds, int res) {
    if (kind == ModelKind::mask_model) {
        require(masks.empty(), ErrorCode::InvalidConfig, "mask models take no conditioning masks");
        return;
    }
    require(masks.size() == seeds.size(), ErrorCode::ShapeMismatch, "one conditioning mask per seed required");
    for (const auto& m : masks)
        require(m.height == res && m.width == res, ErrorCode::ShapeMismatch,
                "conditioning mask must be " + std::to_string(res) + "x" + std::to_string(res));
}

}  // namespace

PixelGenerator::PixelGenerator(denoiser::DenoiserCheckpoint ckpt)
    : ckpt_(std::move(ckpt)), model_(ckpt_.model()), digest_(ckpt_.digest()) {
    require(!ckpt_.latent, ErrorCode::InvalidConfig, "latent checkpoint needs a LatentGenerator");
}

std::vector<ImageTensor> PixelGenerator::sample(std::span<const BinaryMask> masks,
                                                std::span<const std::uint64_t> seeds) const {
    check_masks(ckpt_.kind, masks, seeds, ckpt_.resolution);
    std::vector<ImageTensor> conds;
    for (const auto& m : masks) conds.push_back(mask_to_signed(m));
    auto rngs = rngs_for(seeds);
    const auto sched = diffusion::make_schedule(ckpt_.diffusion);
    return diffusion::sample_loop_batch(model_, ckpt_.arch.in_channels, ckpt_.resolution, ckpt_.resolution, conds, rngs,
                                        sched);
}

LatentGenerator::LatentGenerator(denoiser::DenoiserCheckpoint ckpt, Autoencoder ae)
    : ckpt_(std::move(ckpt)), model_(ckpt_.model()), ae_(std::move(ae)) {
    require(ckpt_.latent.has_value(), ErrorCode::InvalidConfig, "pixel checkpoint needs a PixelGenerator");
    require(ckpt_.latent->autoencoder_digest == ae_.digest(), ErrorCode::InvalidConfig,
            "checkpoint was trained against a different autoencoder");
    require(ckpt_.latent->factor == ae_.arch().factor && ckpt_.latent->latent_channels == ae_.arch().latent_channels,
            ErrorCode::InvalidConfig, "latent geometry does not match the autoencoder");
    digest_ = io::sha256_hex(ckpt_.digest() + ":" + ae_.digest());
}

std::vector<ImageTensor> LatentGenerator::sample(std::span<const BinaryMask> masks,
                                                 std::span<const std::uint64_t> seeds) const {
    check_masks(ckpt_.kind, masks, seeds, resolution());
    const int f = ae_.arch().factor;
    std::vector<ImageTensor> conds;
    for (const auto& m : masks) conds.push_back(downsample_condition(m, f));
    auto rngs = rngs_for(seeds);
    const auto sched = diffusion::make_schedule(ckpt_.diffusion);
    auto zs = diffusion::sample_loop_batch(model_, ckpt_.arch.in_channels, ckpt_.resolution, ckpt_.resolution, conds,
                                           rngs, sched);
    const double inv = 1.0 / ckpt_.latent->scale;
    for (auto& z : zs)
        for (auto& v : z.data) v *= inv;
    return ae_.decode(zs);
}

std::unique_ptr<Generator> make_generator(const denoiser::DenoiserCheckpoint& ckpt, const std::optional<Autoencoder>& ae) {
    if (!ckpt.latent) return std::make_unique<PixelGenerator>(ckpt);
    require(ae.has_value(), ErrorCode::InvalidConfig, "latent checkpoint requires its autoencoder");
    return std::make_unique<LatentGenerator>(ckpt, *ae);
}

std::vector<denoiser::DiffusionExample> make_latent_examples(const data::PairedDataset& ds, ModelKind kind,
                                                             const Autoencoder& ae) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
    std::vector<ImageTensor> items;
    items.reserve(ds.size());
    for (const auto& s : ds.samples) items.push_back(kind == ModelKind::mask_model ? mask_to_signed(s.mask) : s.image);
    auto zs = ae.encode(items);
    const double scale = ae.checkpoint().latent_scale;
    std::vector<denoiser::DiffusionExample> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (auto& v : zs[i].data) v *= scale;
        std::optional<ImageTensor> cond;
        if (kind == ModelKind::image_model) cond = downsample_condition(ds.samples[i].mask, ae.arch().factor);
        out.push_back({std::move(zs[i]), std::move(cond)});
    }
    return out;
}

denoiser::TrainResult train_latent_denoiser(const data::PairedDataset& ds, ModelKind kind, const Autoencoder& ae,
                                            const diffusion::DiffusionConfig& dcfg, const denoiser::TrainConfig& tcfg,
                                            denoiser::DenoiserArch arch, const denoiser::StepCallback& on_step) {
    const auto examples = make_latent_examples(ds, kind, ae);
    arch.in_channels = ae.arch().latent_channels;
    arch.cond_channels = kind == ModelKind::image_model ? 1 : 0;
    auto result = denoiser::train_denoiser(examples, kind, arch, dcfg, tcfg, on_step);
    const denoiser::LatentInfo info{ae.digest(), ae.arch().factor, ae.arch().latent_channels,
                                    ae.checkpoint().latent_scale};
    for (auto& c : result.checkpoints) c.latent = info;
    return result;
}

}  // namespace polypgen::latent
