#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polypgen/data/dataset.hpp"
#include "polypgen/latent/generator.hpp"
#include "polypgen/metrics/fid.hpp"

namespace polypgen::experiment {

/// Lowest FID wins; equal FIDs go to the smaller checkpoint id.
metrics::CheckpointRecord select_best_checkpoint(std::span<const metrics::CheckpointRecord> records);

inline constexpr int kMaxMaskRetries = 10;

struct MaskGenerationLog {
    std::size_t rejected = 0;         // empty samples that were redrawn
    std::size_t still_empty = 0;      // slots that stayed empty after every retry
};

/// Sampler output (in [-1, 1]) to a mask at the 0.5 level of [0, 1].
BinaryMask binarize_sample(const ImageTensor& sample);

/// Seed of slot `index` on attempt `attempt` (0 = first draw, seed + index).
std::uint64_t mask_slot_seed(std::uint64_t seed, std::size_t index, int attempt);

/// n masks from a mask model. Empty masks are redrawn up to kMaxMaskRetries
/// times per slot; each slot depends only on its own seed.
std::vector<BinaryMask> generate_masks(const latent::Generator& gen, std::size_t n, std::uint64_t seed,
                                       MaskGenerationLog* log = nullptr);

/// One image per mask from an image model. `seeds` holds one seed per mask
/// or a single seed s, expanded to s + index. Samples carry the conditioning
/// mask unchanged and ids `<prefix><index:05>`.
std::vector<data::PairedSample> generate_conditioned_images(const latent::Generator& gen,
                                                            std::span<const BinaryMask> masks,
                                                            std::span<const std::uint64_t> seeds,
                                                            const std::string& id_prefix = "syn");

}  // namespace polypgen::experiment
