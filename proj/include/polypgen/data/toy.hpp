#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "polypgen/data/dataset.hpp"

// Seeded synthetic corpora standing in for Kvasir-SEG at desk scale: blob
// masks (one to three filled ellipses) and a deterministic mask → image
// shading rule.
namespace polypgen::data {

BinaryMask make_blob_mask(int resolution, std::mt19937_64& rng);

/// Deterministic image for a mask: a vertically shaded foreground colour over
/// a horizontally shaded background.
ImageTensor shade_mask(const BinaryMask& mask, int channels = 3);

/// n pairs (blob mask, shaded image) with ids `<prefix>0000`, ...
PairedDataset make_toy_dataset(std::size_t n, int resolution, std::uint64_t seed, const std::string& prefix = "toy",
                               int channels = 3);

}  // namespace polypgen::data
