#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "polypgen/error.hpp"

namespace polypgen {

/// Real-valued image or latent grid, channel-major [channels × height × width].
/// Images live in [-1, 1]; the same type carries raw sampler output and
/// latents, which are unbounded.
struct ImageTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const noexcept { return data.size(); }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    bool same_shape(const ImageTensor& o) const noexcept {
        return channels == o.channels && height == o.height && width == o.width;
    }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

/// Binary segmentation mask; 1 marks polyp foreground.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::size_t size() const noexcept { return data.size(); }
    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t foreground() const noexcept {
        std::size_t n = 0;
        for (auto v : data) n += v;
        return n;
    }

    bool same_shape(const BinaryMask& o) const noexcept { return height == o.height && width == o.width; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
    require(a.same_shape(b), ErrorCode::ShapeMismatch, what);
}

/// {0,1} mask → single-channel {-1,+1} tensor, the range diffusion operates on.
inline ImageTensor mask_to_signed(const BinaryMask& m) {
    ImageTensor t(1, m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) t.data[i] = m.data[i] ? 1.0 : -1.0;
    return t;
}

/// Foreground-connected components (4-connectivity).
int count_components(const BinaryMask& m);

}  // namespace polypgen
