#include "polypgen/data/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "polypgen/io/digest.hpp"
#include "polypgen/io/png.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace polypgen::data {

std::string_view provenance_name(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

Provenance parse_provenance(std::string_view s) {
    if (s == "real") return Provenance::real;
    if (s == "synthetic") return Provenance::synthetic;
    throw Error(ErrorCode::InvalidConfig, "unknown provenance: " + std::string(s));
}

std::vector<BinaryMask> PairedDataset::masks() const {
    std::vector<BinaryMask> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.mask);
    return out;
}

std::vector<ImageTensor> PairedDataset::images() const {
    std::vector<ImageTensor> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.image);
    return out;
}

std::uint8_t signed_to_u8(double v) {
    const double u = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 255.0);
    return static_cast<std::uint8_t>(u);
}

namespace {

ImageTensor image_from_png(const io::Image8& png) {
    ImageTensor t(png.channels, png.height, png.width);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            for (int c = 0; c < png.channels; ++c)
                t.at(c, y, x) = u8_to_signed(png.pixels[(static_cast<std::size_t>(y) * png.width + x) * png.channels + c]);
    return t;
}

io::Image8 image_to_png(const ImageTensor& t) {
    io::Image8 png{t.width, t.height, t.channels, {}};
    png.pixels.resize(t.size());
    for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x)
            for (int c = 0; c < t.channels; ++c)
                png.pixels[(static_cast<std::size_t>(y) * t.width + x) * t.channels + c] = signed_to_u8(t.at(c, y, x));
    return png;
}

std::string file_bytes_digest(const std::vector<fs::path>& files) {
    io::Sha256 sha;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw Error(ErrorCode::UnreadableFile, f.string());
        std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        sha.update(f.filename().string());
        sha.update(std::as_bytes(std::span(buf)));
    }
    return sha.hex();
}

}  // namespace

PairedDataset load_paired_dataset(const fs::path& root, int resolution, double mask_threshold, int channels) {
    require(resolution >= 8, ErrorCode::InvalidConfig, "resolution must be >= 8");
    require(mask_threshold > 0.0 && mask_threshold < 1.0, ErrorCode::InvalidConfig, "mask_threshold must be in (0,1)");
    const fs::path image_dir = root / "images";
    const fs::path mask_dir = root / "masks";
    if (!fs::is_directory(image_dir)) throw Error(ErrorCode::UnreadableFile, image_dir.string());
    if (!fs::is_directory(mask_dir)) throw Error(ErrorCode::UnreadableFile, mask_dir.string());

    std::vector<fs::path> image_files;
    for (const auto& e : fs::directory_iterator(image_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") image_files.push_back(e.path());
    std::sort(image_files.begin(), image_files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (image_files.empty()) throw Error(ErrorCode::EmptyDataset, "no .png images under " + image_dir.string());

    std::map<std::string, Provenance> provenance;
    if (const fs::path manifest = root / "manifest.json"; fs::exists(manifest)) {
        std::ifstream in(manifest);
        json j;
        try {
            in >> j;
            const auto& ids = j.at("ids");
            const auto& prov = j.at("provenance");
            for (std::size_t i = 0; i < ids.size() && i < prov.size(); ++i)
                provenance[ids[i].get<std::string>()] = parse_provenance(prov[i].get<std::string>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::UnreadableFile, manifest.string() + ": " + e.what());
        }
    }

    PairedDataset ds;
    ds.resolution = resolution;
    std::vector<fs::path> all_files;
    for (const auto& img_path : image_files) {
        const std::string id = img_path.stem().string();
        const fs::path mask_path = mask_dir / img_path.filename();
        if (!fs::exists(mask_path)) throw Error(ErrorCode::MissingMask, id);
        all_files.push_back(img_path);
        all_files.push_back(mask_path);

        PairedSample s;
        s.id = id;
        s.image = image_from_png(io::read_png(img_path, channels));
        const io::Image8 mpng = io::read_png(mask_path, 1);
        ImageTensor raw(1, mpng.height, mpng.width);
        for (std::size_t i = 0; i < raw.size(); ++i) raw.data[i] = mpng.pixels[i] / 255.0;
        s.mask = binarize_mask(raw, mask_threshold);
        if (!s.mask.same_shape(BinaryMask(s.image.height, s.image.width)))
            s.mask = resize_nearest(s.mask, s.image.height, s.image.width);
        if (auto it = provenance.find(id); it != provenance.end()) s.provenance = it->second;
        ds.samples.push_back(resize_pair(s, resolution));
    }
    ds.source = {root, file_bytes_digest(all_files)};
    return ds;
}

BinaryMask binarize_mask(const ImageTensor& raw, double threshold) {
    require(raw.channels == 1, ErrorCode::ShapeMismatch, "binarize_mask expects a single-channel grid");
    BinaryMask m(raw.height, raw.width);
    for (std::size_t i = 0; i < raw.size(); ++i) m.data[i] = raw.data[i] >= threshold ? 1 : 0;
    return m;
}

BinaryMask binarize_mask(const BinaryMask& mask, double threshold) {
    BinaryMask m(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.size(); ++i) m.data[i] = static_cast<double>(mask.data[i]) >= threshold ? 1 : 0;
    return m;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
    if (image.height == height && image.width == width) return image;
    ImageTensor out(image.channels, height, width);
    const double sy = static_cast<double>(image.height) / height;
    const double sx = static_cast<double>(image.width) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
                const double bot = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = std::clamp(top * (1 - wy) + bot * wy, -1.0, 1.0);
            }
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
    if (mask.height == height && mask.width == width) return mask;
    BinaryMask out(height, width);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * mask.height / height), mask.height - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * mask.width / width), mask.width - 1);
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

PairedSample resize_pair(const PairedSample& sample, int resolution) {
    require(resolution >= 8, ErrorCode::InvalidConfig, "resolution must be >= 8");
    PairedSample out = sample;
    out.image = resize_bilinear(sample.image, resolution, resolution);
    out.mask = resize_nearest(sample.mask, resolution, resolution);
    return out;
}

std::vector<PairedDataset> split_dataset(const PairedDataset& ds, std::span<const std::size_t> counts,
                                         std::uint64_t seed) {
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total > ds.size())
        throw Error(ErrorCode::InsufficientData,
                    "requested " + std::to_string(total) + " samples from a dataset of " + std::to_string(ds.size()));
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<PairedDataset> parts;
    std::size_t cursor = 0;
    for (std::size_t count : counts) {
        PairedDataset part;
        part.resolution = ds.resolution;
        part.source = ds.source;
        part.samples.reserve(count);
        for (std::size_t i = 0; i < count; ++i) part.samples.push_back(ds.samples[order[cursor++]]);
        parts.push_back(std::move(part));
    }
    return parts;
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
    io::Image8 png{mask.width, mask.height, 1, {}};
    png.pixels.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) png.pixels[i] = mask.data[i] ? 255 : 0;
    io::write_png(path, png);
}

BinaryMask read_mask_png(const fs::path& path, double threshold) {
    const io::Image8 png = io::read_png(path, 1);
    BinaryMask m(png.height, png.width);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = png.pixels[i] / 255.0 >= threshold ? 1 : 0;
    return m;
}

fs::path write_generated_dataset(std::span<const PairedSample> samples, const fs::path& out, const GeneratedMeta& meta) {
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to write");
    std::error_code ec;
    fs::create_directories(out / "images", ec);
    fs::create_directories(out / "masks", ec);
    if (ec) throw Error(ErrorCode::IoFailure, out.string() + ": " + ec.message());

    json manifest;
    manifest["ids"] = json::array();
    manifest["provenance"] = json::array();
    std::set<std::string> seen;
    for (const auto& s : samples) {
        if (!seen.insert(s.id).second) throw Error(ErrorCode::IoFailure, "duplicate sample id: " + s.id);
        io::write_png(out / "images" / (s.id + ".png"), image_to_png(s.image));
        write_mask_png(out / "masks" / (s.id + ".png"), s.mask);
        manifest["ids"].push_back(s.id);
        manifest["provenance"].push_back(std::string(provenance_name(s.provenance)));
    }
    manifest["generator_digest"] = meta.generator_digest;
    manifest["seed"] = meta.seed;
    manifest["resolution"] = samples.front().mask.height;
    const auto now = std::chrono::system_clock::now();
    manifest["created_at"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();

    const fs::path path = out / "manifest.json";
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::IoFailure, path.string());
    f << manifest.dump(2) << '\n';
    if (!f) throw Error(ErrorCode::IoFailure, path.string());
    return path;
}

PairedDataset assemble_dataset(std::vector<PairedSample> samples, int resolution) {
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to assemble");
    std::set<std::string> seen;
    for (const auto& s : samples) {
        require(s.mask.height == resolution && s.mask.width == resolution && s.image.height == resolution &&
                    s.image.width == resolution,
                ErrorCode::ShapeMismatch, "sample " + s.id + " is not at resolution " + std::to_string(resolution));
        require(seen.insert(s.id).second, ErrorCode::InvalidConfig, "duplicate sample id: " + s.id);
    }
    PairedDataset ds;
    ds.samples = std::move(samples);
    ds.resolution = resolution;
    return ds;
}

}  // namespace polypgen::data
