#include "polypgen/io/png.hpp"

#include <png.h>

#include <cstring>

#include "polypgen/error.hpp"

namespace polypgen::io {

Image8 read_png(const std::filesystem::path& path, int channels) {
    require(channels == 1 || channels == 3, ErrorCode::InvalidConfig, "png channels must be 1 or 3");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw Error(ErrorCode::UnreadableFile, path.string() + ": " + img.message);
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image8 out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.channels = channels;
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw Error(ErrorCode::UnreadableFile, path.string() + ": " + msg);
    }
    return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    require(image.channels == 1 || image.channels == 3, ErrorCode::IoFailure, "png channels must be 1 or 3");
    require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height * image.channels,
            ErrorCode::IoFailure, "pixel buffer size mismatch for " + path.string());
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
        throw Error(ErrorCode::IoFailure, path.string() + ": " + img.message);
}

}  // namespace polypgen::io
