#include "polypgen/data/toy.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace polypgen::data {

BinaryMask make_blob_mask(int resolution, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> blob_count(1, 3);
    const double r = resolution;
    BinaryMask m(resolution, resolution);
    const int blobs = blob_count(rng);
    for (int b = 0; b < blobs; ++b) {
        const double cy = r * (0.2 + 0.6 * unit(rng));
        const double cx = r * (0.2 + 0.6 * unit(rng));
        const double ry = r * (0.08 + 0.17 * unit(rng));
        const double rx = r * (0.08 + 0.17 * unit(rng));
        const double theta = std::numbers::pi * unit(rng);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) {
                const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
                const double u = (dx * ct + dy * st) / rx;
                const double v = (-dx * st + dy * ct) / ry;
                if (u * u + v * v <= 1.0) m.at(y, x) = 1;
            }
    }
    if (m.foreground() == 0) m.at(resolution / 2, resolution / 2) = 1;
    return m;
}

ImageTensor shade_mask(const BinaryMask& mask, int channels) {
    ImageTensor img(channels, mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        const double fy = (y + 0.5) / mask.height;
        for (int x = 0; x < mask.width; ++x) {
            const double fx = (x + 0.5) / mask.width;
            for (int c = 0; c < channels; ++c) {
                double v;
                if (mask.at(y, x)) {
                    static constexpr double fg_top[3] = {0.9, 0.5, 0.1};
                    v = fg_top[c % 3] - 0.5 * fy;
                } else {
                    static constexpr double bg[3] = {-0.2, -0.6, -0.7};
                    v = bg[c % 3] - 0.2 * fx;
                }
                img.at(c, y, x) = v;
            }
        }
    }
    return img;
}

PairedDataset make_toy_dataset(std::size_t n, int resolution, std::uint64_t seed, const std::string& prefix,
                               int channels) {
    std::mt19937_64 rng(seed);
    PairedDataset ds;
    ds.resolution = resolution;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        PairedSample s;
        s.mask = make_blob_mask(resolution, rng);
        s.image = shade_mask(s.mask, channels);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04zu", i);
        s.id = prefix + buf;
        s.provenance = Provenance::real;
        ds.samples.push_back(std::move(s));
    }
    ds.source = {"toy:" + prefix, "seed=" + std::to_string(seed)};
    return ds;
}

}  // namespace polypgen::data
