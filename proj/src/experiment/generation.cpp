#include "polypgen/experiment/generation.hpp"

#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "polypgen/seeding.hpp"

namespace polypgen::experiment {

metrics::CheckpointRecord select_best_checkpoint(std::span<const metrics::CheckpointRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyList, "no checkpoint records to select from");
    const metrics::CheckpointRecord* best = &records.front();
    for (const auto& r : records) {
        require(std::isfinite(r.fid), ErrorCode::InvalidConfig, "checkpoint " + std::to_string(r.id) + " has a non-finite FID");
        if (r.fid < best->fid || (r.fid == best->fid && r.id < best->id)) best = &r;
    }
    return *best;
}

BinaryMask binarize_sample(const ImageTensor& sample) {
    require(sample.channels == 1, ErrorCode::ShapeMismatch, "mask samples must be single-channel");
    BinaryMask m(sample.height, sample.width);
    for (std::size_t i = 0; i < sample.size(); ++i) m.data[i] = (sample.data[i] + 1.0) / 2.0 >= 0.5 ? 1 : 0;
    return m;
}

std::uint64_t mask_slot_seed(std::uint64_t seed, std::size_t index, int attempt) {
    const std::uint64_t base = seed + index;
    return attempt == 0 ? base : derive_seed(base, 1000 + static_cast<std::uint64_t>(attempt));
}

std::vector<BinaryMask> generate_masks(const latent::Generator& gen, std::size_t n, std::uint64_t seed,
                                       MaskGenerationLog* log) {
    if (gen.kind() != denoiser::ModelKind::mask_model)
        throw Error(ErrorCode::WrongModelKind, "generate_masks needs a mask model");
    std::vector<BinaryMask> masks(n);
    std::vector<std::size_t> pending(n);
    for (std::size_t i = 0; i < n; ++i) pending[i] = i;
    MaskGenerationLog local;
    for (int attempt = 0; attempt <= kMaxMaskRetries && !pending.empty(); ++attempt) {
        std::vector<std::uint64_t> seeds;
        for (auto i : pending) seeds.push_back(mask_slot_seed(seed, i, attempt));
        const auto samples = gen.sample({}, seeds);
        std::vector<std::size_t> empty;
        for (std::size_t k = 0; k < pending.size(); ++k) {
            masks[pending[k]] = binarize_sample(samples[k]);
            if (masks[pending[k]].foreground() == 0) empty.push_back(pending[k]);
        }
        if (!empty.empty() && attempt < kMaxMaskRetries) {
            local.rejected += empty.size();
            spdlog::info("generate_masks: redrawing {} empty mask(s), attempt {}", empty.size(), attempt + 1);
        }
        pending = std::move(empty);
    }
    local.still_empty = pending.size();
    if (!pending.empty()) spdlog::warn("generate_masks: {} slot(s) still empty after {} retries", pending.size(), kMaxMaskRetries);
    if (log) *log = local;
    return masks;
}

std::vector<data::PairedSample> generate_conditioned_images(const latent::Generator& gen,
                                                            std::span<const BinaryMask> masks,
                                                            std::span<const std::uint64_t> seeds,
                                                            const std::string& id_prefix) {
    if (gen.kind() != denoiser::ModelKind::image_model)
        throw Error(ErrorCode::WrongModelKind, "generate_conditioned_images needs an image model");
    if (masks.empty()) return {};
    require(seeds.size() == masks.size() || seeds.size() == 1, ErrorCode::ShapeMismatch,
            "need one seed per mask or a single seed");
    std::vector<std::uint64_t> expanded(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) expanded[i] = seeds.size() == 1 ? seeds[0] + i : seeds[i];
    auto images = gen.sample(masks, expanded);
    std::vector<data::PairedSample> out;
    out.reserve(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%05zu", i);
        out.push_back({std::move(images[i]), masks[i], id_prefix + id, data::Provenance::synthetic});
    }
    return out;
}

}  // namespace polypgen::experiment
