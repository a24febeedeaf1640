#include "polypgen/metrics/fid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace polypgen::metrics {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_mat(std::span<const double> m, std::size_t d) {
    require(m.size() == d * d, ErrorCode::DimensionMismatch, "matrix size does not match dimension");
    Mat out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    std::copy(m.begin(), m.end(), out.data());
    return out;
}

// Eigenvalues of a symmetric matrix after the PSD check, with tiny negatives
// zeroed.
Eigen::SelfAdjointEigenSolver<Mat> checked_eigen(const Mat& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    require(es.info() == Eigen::Success, ErrorCode::NonPSDInput, std::string(what) + ": eigendecomposition failed");
    const auto& ev = es.eigenvalues();
    if (ev.size() == 0) return es;
    const double scale = std::max(1.0, ev.maxCoeff());
    if (ev.minCoeff() < -kPsdTolerance * scale)
        throw Error(ErrorCode::NonPSDInput,
                    std::string(what) + " has eigenvalue " + std::to_string(ev.minCoeff()) + " below tolerance");
    return es;
}

Mat sqrt_from(const Eigen::SelfAdjointEigenSolver<Mat>& es) {
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Overlap of input cell i with output cell o, both scaled to integer units:
// input cells are `out_n` wide, output cells `in_n` wide.
std::vector<std::vector<std::pair<int, double>>> pool_weights(int in_n, int out_n) {
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
        const long lo = static_cast<long>(o) * in_n, hi = static_cast<long>(o + 1) * in_n;
        for (long i = lo / out_n; i < in_n && i * out_n < hi; ++i) {
            const long overlap = std::min(hi, (i + 1) * out_n) - std::max(lo, i * out_n);
            if (overlap > 0) w[static_cast<std::size_t>(o)].push_back({static_cast<int>(i), static_cast<double>(overlap)});
        }
    }
    return w;
}

std::vector<double> pooled_features(const ImageTensor& item) {
    std::vector<double> mean(item.plane(), 0.0);
    for (int c = 0; c < item.channels; ++c)
        for (std::size_t p = 0; p < item.plane(); ++p) mean[p] += item.data[static_cast<std::size_t>(c) * item.plane() + p];
    for (auto& v : mean) v /= item.channels;
    return area_pool(mean, item.height, item.width, kPoolSide);
}

ImageTensor mask_as_unit(const BinaryMask& m) {
    ImageTensor t(1, m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) t.data[i] = m.data[i] ? 1.0 : 0.0;
    return t;
}

void check_finite(const FeatureMatrix& f) {
    for (double v : f.data) require(std::isfinite(v), ErrorCode::NonPSDInput, "non-finite feature value");
}

}  // namespace

FeatureExtractor FeatureExtractor::downsample_pixels() { return {FeatureKind::downsample_pixels, kPoolSide * kPoolSide, nullptr}; }

FeatureExtractor FeatureExtractor::trained_encoder(std::shared_ptr<const latent::Autoencoder> encoder, int resolution) {
    require(encoder != nullptr, ErrorCode::InvalidConfig, "trained_encoder needs an autoencoder");
    const auto& a = encoder->arch();
    require(resolution % a.factor == 0, ErrorCode::IndivisibleSize, "resolution not divisible by encoder factor");
    const int side = resolution / a.factor;
    return {FeatureKind::trained_encoder, a.latent_channels * side * side, std::move(encoder)};
}

std::vector<double> area_pool(std::span<const double> plane, int height, int width, int side) {
    require(height > 0 && width > 0 && side > 0, ErrorCode::ShapeMismatch, "area_pool needs positive sizes");
    require(plane.size() == static_cast<std::size_t>(height) * width, ErrorCode::ShapeMismatch, "plane size");
    const auto wy = pool_weights(height, side);
    const auto wx = pool_weights(width, side);
    const double area = static_cast<double>(height) * width;
    std::vector<double> out(static_cast<std::size_t>(side) * side, 0.0);
    for (int oy = 0; oy < side; ++oy)
        for (int ox = 0; ox < side; ++ox) {
            double acc = 0.0;
            for (const auto& [y, a] : wy[static_cast<std::size_t>(oy)])
                for (const auto& [x, b] : wx[static_cast<std::size_t>(ox)])
                    acc += a * b * plane[static_cast<std::size_t>(y) * width + x];
            out[static_cast<std::size_t>(oy) * side + ox] = acc / area;
        }
    return out;
}

FeatureMatrix extract_features(std::span<const ImageTensor> items, const FeatureExtractor& fx) {
    if (items.empty()) throw Error(ErrorCode::EmptySet, "no items to extract features from");
    FeatureMatrix f;
    f.rows = items.size();
    f.cols = static_cast<std::size_t>(fx.output_dim);
    f.data.reserve(f.rows * f.cols);
    if (fx.kind == FeatureKind::downsample_pixels) {
        for (const auto& it : items) {
            const auto v = pooled_features(it);
            f.data.insert(f.data.end(), v.begin(), v.end());
        }
    } else {
        require(fx.encoder != nullptr, ErrorCode::InvalidConfig, "trained_encoder extractor has no encoder");
        const auto zs = fx.encoder->encode(items);
        for (const auto& z : zs) {
            require(z.size() == f.cols, ErrorCode::DimensionMismatch, "encoder output does not match output_dim");
            f.data.insert(f.data.end(), z.data.begin(), z.data.end());
        }
    }
    check_finite(f);
    return f;
}

FeatureMatrix extract_features(std::span<const BinaryMask> items, const FeatureExtractor& fx) {
    std::vector<ImageTensor> grids;
    grids.reserve(items.size());
    // The encoder was trained on signed masks; pixel pooling reports foreground fractions.
    for (const auto& m : items)
        grids.push_back(fx.kind == FeatureKind::trained_encoder ? mask_to_signed(m) : mask_as_unit(m));
    return extract_features(std::span<const ImageTensor>(grids), fx);
}

GaussianStats gaussian_stats(const FeatureMatrix& f) {
    if (f.rows < 2) throw Error(ErrorCode::TooFewSamples, "gaussian_stats needs at least 2 rows, got " + std::to_string(f.rows));
    const std::size_t n = f.rows, d = f.cols;
    GaussianStats s;
    s.n = n;
    s.dim = d;
    s.mu.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) s.mu[c] += f.at(r, c);
    for (auto& m : s.mu) m /= static_cast<double>(n);
    s.sigma.assign(d * d, 0.0);
    std::vector<double> centred(d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) centred[c] = f.at(r, c) - s.mu[c];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) s.sigma[i * d + j] += centred[i] * centred[j];
    }
    for (auto& v : s.sigma) v /= static_cast<double>(n - 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double avg = 0.5 * (s.sigma[i * d + j] + s.sigma[j * d + i]);
            s.sigma[i * d + j] = s.sigma[j * d + i] = avg;
        }
    return s;
}

std::vector<double> psd_sqrt(std::span<const double> m, std::size_t d) {
    Mat a = to_mat(m, d);
    a = 0.5 * (a + a.transpose()).eval();
    const Mat root = sqrt_from(checked_eigen(a, "matrix"));
    return {root.data(), root.data() + root.size()};
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    require(a.dim == b.dim && a.mu.size() == b.mu.size(), ErrorCode::DimensionMismatch,
            "stats dimensions differ: " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
    const std::size_t d = a.dim;
    double mean_term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a.mu[i] - b.mu[i];
        mean_term += diff * diff;
    }
    Mat sa = to_mat(a.sigma, d), sb = to_mat(b.sigma, d);
    sa = 0.5 * (sa + sa.transpose()).eval();
    sb = 0.5 * (sb + sb.transpose()).eval();
    const Mat root_a = sqrt_from(checked_eigen(sa, "sigma_a"));
    checked_eigen(sb, "sigma_b");
    Mat prod = root_a * sb * root_a;
    prod = 0.5 * (prod + prod.transpose()).eval();
    const auto es = checked_eigen(prod, "covariance product");
    const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double dist = mean_term + sa.trace() + sb.trace() - 2.0 * cross;
    return std::max(0.0, dist);
}

double fid(std::span<const ImageTensor> real, std::span<const ImageTensor> generated, const FeatureExtractor& fx) {
    return frechet_distance(gaussian_stats(extract_features(real, fx)), gaussian_stats(extract_features(generated, fx)));
}

double fid(std::span<const BinaryMask> real, std::span<const BinaryMask> generated, const FeatureExtractor& fx) {
    return frechet_distance(gaussian_stats(extract_features(real, fx)), gaussian_stats(extract_features(generated, fx)));
}

}  // namespace polypgen::metrics
