#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "polypgen/latent/autoencoder.hpp"
#include "polypgen/tensor.hpp"

namespace polypgen::metrics {

/// Row-major n × d feature matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class FeatureKind { downsample_pixels, trained_encoder };

/// downsample_pixels: channel-averaged, area-pooled to 8×8 (d = 64).
/// trained_encoder: flattened latent of a frozen autoencoder encoder.
struct FeatureExtractor {
    FeatureKind kind = FeatureKind::downsample_pixels;
    int output_dim = 64;
    std::shared_ptr<const latent::Autoencoder> encoder;

    static FeatureExtractor downsample_pixels();
    /// `resolution` is the item size the encoder will see.
    static FeatureExtractor trained_encoder(std::shared_ptr<const latent::Autoencoder> encoder, int resolution);
};

inline constexpr int kPoolSide = 8;

/// Exact area-weighted pooling of one plane to side × side (any input size).
std::vector<double> area_pool(std::span<const double> plane, int height, int width, int side);

/// Images enter as they are; masks enter as {0, 1} single-channel grids.
FeatureMatrix extract_features(std::span<const ImageTensor> items, const FeatureExtractor& fx);
FeatureMatrix extract_features(std::span<const BinaryMask> items, const FeatureExtractor& fx);

struct GaussianStats {
    std::size_t n = 0;  // sample count; FID is sample-size sensitive
    std::size_t dim = 0;
    std::vector<double> mu;
    std::vector<double> sigma;  // row-major dim × dim, symmetric
};

/// Column mean and unbiased (n − 1) covariance, symmetrised.
GaussianStats gaussian_stats(const FeatureMatrix& f);

/// Eigenvalues below this are rejected as non-PSD; those in [this, 0] are
/// treated as 0. Scaled by max(1, largest eigenvalue).
inline constexpr double kPsdTolerance = 1e-6;

/// Principal square root of a symmetric PSD matrix (row-major d × d).
std::vector<double> psd_sqrt(std::span<const double> m, std::size_t d);

/// ‖μa − μb‖² + Tr(Σa + Σb − 2(Σa·Σb)^{1/2}), computed as
/// Tr((√Σa Σb √Σa)^{1/2}) for the cross term; clamped to ≥ 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

double fid(std::span<const ImageTensor> real, std::span<const ImageTensor> generated, const FeatureExtractor& fx);
double fid(std::span<const BinaryMask> real, std::span<const BinaryMask> generated, const FeatureExtractor& fx);

/// One evaluated generator checkpoint, labelled by optimizer step.
struct CheckpointRecord {
    std::int64_t id = 0;
    double fid = 0.0;
    std::optional<double> sim;  // percentage, masks only
    friend bool operator==(const CheckpointRecord&, const CheckpointRecord&) = default;
};

}  // namespace polypgen::metrics
