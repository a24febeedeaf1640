#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polypgen/tensor.hpp"

namespace polypgen::data {

enum class Provenance { real, synthetic };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);

struct PairedSample {
    ImageTensor image;
    BinaryMask mask;
    std::string id;
    Provenance provenance = Provenance::real;
};

struct SourceManifest {
    std::filesystem::path path;
    std::string digest;
};

struct PairedDataset {
    std::vector<PairedSample> samples;
    int resolution = 0;
    SourceManifest source;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }

    std::vector<BinaryMask> masks() const;
    std::vector<ImageTensor> images() const;
};

inline constexpr double kDefaultMaskThreshold = 0.5;
inline constexpr int kDefaultResolution = 64;

/// 8-bit ↔ [-1, 1] mapping used for every stored image.
inline double u8_to_signed(std::uint8_t u) { return 2.0 * (u / 255.0) - 1.0; }
std::uint8_t signed_to_u8(double v);

/// Loads `root/images/*.png` paired with `root/masks/<same name>`, sorted by
/// filename. A `manifest.json` written by write_generated_dataset, when
/// present, supplies provenance.
PairedDataset load_paired_dataset(const std::filesystem::path& root, int resolution,
                                  double mask_threshold = kDefaultMaskThreshold, int channels = 3);

/// output[p] = 1 iff raw[p] >= threshold (ties go to foreground). `raw` must be
/// single-channel.
BinaryMask binarize_mask(const ImageTensor& raw, double threshold = kDefaultMaskThreshold);
BinaryMask binarize_mask(const BinaryMask& mask, double threshold = kDefaultMaskThreshold);

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);
PairedSample resize_pair(const PairedSample& sample, int resolution);

/// Disjoint subsets of the requested sizes from one seeded permutation.
std::vector<PairedDataset> split_dataset(const PairedDataset& ds, std::span<const std::size_t> counts,
                                         std::uint64_t seed);

/// Single mask as an 8-bit grayscale PNG (0 / 255) and back.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const std::filesystem::path& path, double threshold = kDefaultMaskThreshold);

struct GeneratedMeta {
    std::string generator_digest;
    std::uint64_t seed = 0;
};

/// Writes images/, masks/ and manifest.json; returns the manifest path.
std::filesystem::path write_generated_dataset(std::span<const PairedSample> samples,
                                              const std::filesystem::path& out, const GeneratedMeta& meta);

/// Wraps generator output as a dataset; checks shared resolution and unique ids.
PairedDataset assemble_dataset(std::vector<PairedSample> samples, int resolution);

}  // namespace polypgen::data
