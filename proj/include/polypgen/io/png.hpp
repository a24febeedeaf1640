#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace polypgen::io {

/// 8-bit interleaved pixels, row-major, channels ∈ {1, 3}.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Reads any PNG and converts it to `channels` (1 = gray, 3 = RGB).
Image8 read_png(const std::filesystem::path& path, int channels);
void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace polypgen::io
