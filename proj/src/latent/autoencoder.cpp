#include "polypgen/latent/autoencoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "polypgen/io/container.hpp"
#include "polypgen/nn/adam.hpp"
#include "polypgen/nn/blocks.hpp"
#include "polypgen/seeding.hpp"

using nlohmann::json;

namespace polypgen::latent {

void AutoencoderArch::validate() const {
    require(in_channels >= 1, ErrorCode::InvalidArch, "autoencoder in_channels must be positive");
    require(factor >= 2 && std::has_single_bit(static_cast<unsigned>(factor)) && factor <= 16, ErrorCode::InvalidArch,
            "downsample factor must be a power of two in [2, 16]");
    require(latent_channels >= 1, ErrorCode::InvalidArch, "latent_channels must be positive");
    require(base_channels >= 1 && base_channels <= 256, ErrorCode::InvalidArch, "base_channels out of range");
}

int AutoencoderArch::levels() const { return std::countr_zero(static_cast<unsigned>(factor)); }

void to_json(json& j, const AutoencoderArch& a) {
    j = json{{"in_channels", a.in_channels},
             {"factor", a.factor},
             {"latent_channels", a.latent_channels},
             {"base_channels", a.base_channels}};
}

void from_json(const json& j, AutoencoderArch& a) {
    j.at("in_channels").get_to(a.in_channels);
    j.at("factor").get_to(a.factor);
    j.at("latent_channels").get_to(a.latent_channels);
    j.at("base_channels").get_to(a.base_channels);
}

template <class T>
AutoencoderNet<T>::AutoencoderNet(const AutoencoderArch& arch) : arch_(arch) {
    arch_.validate();
    const int c = arch_.base_channels;
    enc_stem_ = nn::make_conv(params_, arch_.in_channels, c);
    for (int l = 0; l < arch_.levels(); ++l) {
        enc_down_.push_back(nn::make_down(params_, c, c));
        enc_norm_.push_back(nn::make_group_norm(params_, c));
    }
    enc_out_ = nn::make_conv(params_, c, arch_.latent_channels);
    dec_stem_ = nn::make_conv(params_, arch_.latent_channels, c);
    for (int l = 0; l < arch_.levels(); ++l) {
        dec_up_.push_back(nn::make_conv(params_, c, c));
        dec_norm_.push_back(nn::make_group_norm(params_, c));
    }
    dec_out_ = nn::make_conv(params_, c, arch_.in_channels);
}

template <class T>
typename AutoencoderNet<T>::Var AutoencoderNet<T>::encode(nn::Graph<T>& g, Var x) const {
    const nn::Shape s = g.shape(x);
    require(s.c == arch_.in_channels, ErrorCode::ShapeMismatch, "autoencoder input channels");
    require(s.h % arch_.factor == 0 && s.w % arch_.factor == 0, ErrorCode::ShapeMismatch,
            "image side must be divisible by the downsample factor");
    Var h = g.silu(g.conv2d(x, enc_stem_));
    for (std::size_t l = 0; l < enc_down_.size(); ++l) h = g.silu(g.group_norm(g.conv2d(h, enc_down_[l]), enc_norm_[l]));
    return g.conv2d(h, enc_out_);
}

template <class T>
typename AutoencoderNet<T>::Var AutoencoderNet<T>::decode(nn::Graph<T>& g, Var z) const {
    require(g.shape(z).c == arch_.latent_channels, ErrorCode::ShapeMismatch, "latent channels");
    Var h = g.silu(g.conv2d(z, dec_stem_));
    for (std::size_t l = 0; l < dec_up_.size(); ++l)
        h = g.silu(g.group_norm(g.conv2d(g.upsample2(h), dec_up_[l]), dec_norm_[l]));
    return g.conv2d(h, dec_out_);
}

template class AutoencoderNet<float>;
template class AutoencoderNet<double>;

namespace {

json header_of(const AutoencoderCheckpoint& c) {
    return json{{"arch", c.arch},
                {"resolution", c.resolution},
                {"step", c.step},
                {"seed", c.seed},
                {"latent_scale", c.latent_scale}};
}

ImageTensor clamp_unit(ImageTensor t) {
    for (auto& v : t.data) v = std::clamp(v, -1.0, 1.0);
    return t;
}

}  // namespace

std::string AutoencoderCheckpoint::digest() const {
    return io::container_digest(kAutoencoderMagic, header_of(*this), parameters);
}

void save_autoencoder(const AutoencoderCheckpoint& ckpt, const std::filesystem::path& path) {
    io::write_container(path, kAutoencoderMagic, header_of(ckpt), ckpt.parameters);
}

AutoencoderCheckpoint load_autoencoder(const std::filesystem::path& path) {
    io::Container c = io::read_container(path, kAutoencoderMagic);
    AutoencoderCheckpoint ckpt;
    try {
        const json& h = c.header;
        ckpt.arch = h.at("arch").get<AutoencoderArch>();
        ckpt.resolution = h.at("resolution").get<int>();
        ckpt.step = h.at("step").get<std::int64_t>();
        ckpt.seed = h.at("seed").get<std::uint64_t>();
        ckpt.latent_scale = h.at("latent_scale").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    ckpt.arch.validate();
    ckpt.parameters = std::move(c.parameters);
    if (AutoencoderNet<float>(ckpt.arch).params().size() != ckpt.parameters.size())
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": parameter count does not match architecture");
    return ckpt;
}

void AETrainConfig::validate() const {
    require(learning_rate > 0.0, ErrorCode::InvalidConfig, "learning_rate must be positive");
    require(batch_size >= 1, ErrorCode::InvalidConfig, "batch_size must be >= 1");
    require(total_steps >= 1, ErrorCode::InvalidConfig, "total_steps must be >= 1");
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "psnr operands");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(4.0 / mse);
}

AETrainResult train_autoencoder(std::span<const ImageTensor> items, const AutoencoderArch& arch,
                                const AETrainConfig& cfg) {
    cfg.validate();
    arch.validate();
    if (items.empty()) throw Error(ErrorCode::EmptyDataset, "autoencoder training set is empty");
    const ImageTensor& proto = items.front();
    require(proto.channels == arch.in_channels, ErrorCode::ShapeMismatch, "item channels do not match architecture");
    require(proto.height == proto.width, ErrorCode::ShapeMismatch, "autoencoder expects square items");
    for (const auto& it : items) require(it.same_shape(proto), ErrorCode::ShapeMismatch, "items must share a shape");

    AutoencoderNet<float> net(arch);
    net.params().initialize(derive_seed(cfg.seed, streams::init));
    nn::Adam<float> opt(net.params().size(), nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(derive_seed(cfg.seed, streams::data));
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);

    AETrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.total_steps));
    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
        std::vector<std::vector<double>> xs;
        for (int b = 0; b < cfg.batch_size; ++b) xs.push_back(items[pick(rng)].data);
        const auto batch = nn::pack_batch<float>(xs, proto.channels, proto.height, proto.width);

        net.params().zero_grad();
        nn::Graph<float> g(net.params());
        const auto x = g.input(batch);
        const auto y = net.decode(g, net.encode(g, x));
        const auto& pred = g.value(y).data;
        const double count = static_cast<double>(pred.size());
        double acc = 0.0;
        std::vector<float> dout(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = static_cast<double>(pred[i]) - static_cast<double>(batch.data[i]);
            acc += d * d;
            dout[i] = static_cast<float>(2.0 * d / count);
        }
        const double loss = acc / count;
        if (!std::isfinite(loss))
            throw Error(ErrorCode::NonFiniteLoss, "autoencoder loss " + std::to_string(loss) + " at step " + std::to_string(step));
        g.backward(y, dout);
        opt.step(net.params());
        result.loss_curve.push_back(loss);
    }

    AutoencoderCheckpoint& ckpt = result.checkpoint;
    ckpt.arch = arch;
    ckpt.resolution = proto.height;
    ckpt.step = cfg.total_steps;
    ckpt.seed = cfg.seed;
    ckpt.parameters.assign(net.params().values().begin(), net.params().values().end());

    // Latent scale and reconstruction quality over the whole training set.
    Autoencoder ae(ckpt);
    const auto zs = ae.encode(items);
    double peak = 0.0;
    for (const auto& z : zs)
        for (double v : z.data) peak = std::max(peak, std::abs(v));
    ckpt.latent_scale = peak > 1e-8 ? 1.0 / peak : 1.0;

    const auto recon = ae.decode(zs);
    double err = 0.0, total = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = 0; j < items[i].size(); ++j) {
            const double d = recon[i].data[j] - items[i].data[j];
            err += d * d;
            total += 1.0;
        }
    const double mse = err / total;
    result.train_psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(4.0 / mse);
    return result;
}

AETrainResult train_autoencoder(const data::PairedDataset& ds, const AutoencoderArch& arch, const AETrainConfig& cfg) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "autoencoder training set is empty");
    const auto images = ds.images();
    return train_autoencoder(std::span<const ImageTensor>(images), arch, cfg);
}

Autoencoder::Autoencoder(AutoencoderCheckpoint ckpt) : ckpt_(std::move(ckpt)), net_(ckpt_.arch) {
    net_.params().assign(std::span<const float>(ckpt_.parameters));
    digest_ = ckpt_.digest();
}

std::vector<LatentTensor> Autoencoder::encode(std::span<const ImageTensor> images) const {
    std::vector<LatentTensor> out;
    out.reserve(images.size());
    const std::size_t chunk = std::max<std::size_t>(1, max_batch);
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        const std::size_t count = std::min(chunk, images.size() - start);
        const ImageTensor& first = images[start];
        std::vector<std::vector<double>> xs;
        for (std::size_t i = 0; i < count; ++i) {
            require(images[start + i].same_shape(first), ErrorCode::ShapeMismatch, "batch items must share a shape");
            xs.push_back(images[start + i].data);
        }
        nn::Graph<float> g(net_.params());
        const auto z = net_.encode(g, g.input(nn::pack_batch<float>(xs, first.channels, first.height, first.width)));
        const nn::Shape s = g.shape(z);
        for (std::size_t i = 0; i < count; ++i) {
            LatentTensor t(s.c, s.h, s.w);
            t.data = nn::unpack_item(g.value(z), static_cast<int>(i));
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<ImageTensor> Autoencoder::decode(std::span<const LatentTensor> zs) const {
    std::vector<ImageTensor> out;
    out.reserve(zs.size());
    const std::size_t chunk = std::max<std::size_t>(1, max_batch);
    for (std::size_t start = 0; start < zs.size(); start += chunk) {
        const std::size_t count = std::min(chunk, zs.size() - start);
        const LatentTensor& first = zs[start];
        std::vector<std::vector<double>> xs;
        for (std::size_t i = 0; i < count; ++i) {
            require(zs[start + i].same_shape(first), ErrorCode::ShapeMismatch, "batch items must share a shape");
            xs.push_back(zs[start + i].data);
        }
        nn::Graph<float> g(net_.params());
        const auto y = net_.decode(g, g.input(nn::pack_batch<float>(xs, first.channels, first.height, first.width)));
        const nn::Shape s = g.shape(y);
        for (std::size_t i = 0; i < count; ++i) {
            ImageTensor t(s.c, s.h, s.w);
            t.data = nn::unpack_item(g.value(y), static_cast<int>(i));
            out.push_back(clamp_unit(std::move(t)));
        }
    }
    return out;
}

LatentTensor Autoencoder::encode(const ImageTensor& image) const {
    return encode(std::span<const ImageTensor>(&image, 1)).front();
}

ImageTensor Autoencoder::decode(const LatentTensor& z) const { return decode(std::span<const LatentTensor>(&z, 1)).front(); }

ImageTensor pool_mask(const BinaryMask& mask, int factor) {
    require(factor >= 1, ErrorCode::InvalidConfig, "pooling factor must be positive");
    require(mask.height % factor == 0 && mask.width % factor == 0, ErrorCode::IndivisibleSize,
            "mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) + " not divisible by " +
                std::to_string(factor));
    const int h = mask.height / factor, w = mask.width / factor;
    ImageTensor out(1, h, w);
    const double area = static_cast<double>(factor) * factor;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int count = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) count += mask.at(y * factor + dy, x * factor + dx);
            out.at(0, y, x) = count / area;
        }
    return out;
}

ImageTensor downsample_condition(const BinaryMask& mask, int factor) {
    ImageTensor out = pool_mask(mask, factor);
    for (auto& v : out.data) v = 2.0 * v - 1.0;
    return out;
}

}  // namespace polypgen::latent
