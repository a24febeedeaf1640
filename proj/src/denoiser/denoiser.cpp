#include "polypgen/denoiser/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace polypgen::denoiser {

void DenoiserArch::validate() const {
    require(base_channels >= 1 && base_channels <= 256, ErrorCode::InvalidArch, "base_channels out of range");
    require(depth >= 1 && depth <= 4, ErrorCode::InvalidArch, "depth must be in [1, 4]");
    require(in_channels >= 1, ErrorCode::InvalidArch, "in_channels must be positive");
    require(cond_channels >= 0, ErrorCode::InvalidArch, "cond_channels must be non-negative");
    require(embed_dim >= 2 && embed_dim % 2 == 0, ErrorCode::InvalidArch, "embed_dim must be even and >= 2");
}

void to_json(nlohmann::json& j, const DenoiserArch& a) {
    j = nlohmann::json{{"base_channels", a.base_channels},
                       {"depth", a.depth},
                       {"in_channels", a.in_channels},
                       {"cond_channels", a.cond_channels},
                       {"embed_dim", a.embed_dim}};
}

void from_json(const nlohmann::json& j, DenoiserArch& a) {
    j.at("base_channels").get_to(a.base_channels);
    j.at("depth").get_to(a.depth);
    j.at("in_channels").get_to(a.in_channels);
    j.at("cond_channels").get_to(a.cond_channels);
    j.at("embed_dim").get_to(a.embed_dim);
}

std::vector<double> timestep_embedding(int t, int dim) {
    require(dim >= 2 && dim % 2 == 0, ErrorCode::InvalidDim, "embedding dim must be even and >= 2");
    const int half = dim / 2;
    std::vector<double> e(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double omega = std::pow(10000.0, -2.0 * i / dim);
        e[static_cast<std::size_t>(i)] = std::sin(t * omega);
        e[static_cast<std::size_t>(half + i)] = std::cos(t * omega);
    }
    return e;
}

template <class T>
DenoiserNet<T>::DenoiserNet(const DenoiserArch& arch) : arch_(arch) {
    arch_.validate();
    const int tdim = arch_.time_dim();
    time1_ = nn::make_linear(params_, arch_.embed_dim, tdim);
    time2_ = nn::make_linear(params_, tdim, tdim);
    stem_ = nn::make_conv(params_, arch_.in_channels + arch_.cond_channels, arch_.channels_at(0));
    for (int l = 0; l < arch_.depth; ++l) {
        enc_.push_back(nn::ResBlock::make(params_, arch_.channels_at(l), arch_.channels_at(l), tdim));
        down_.push_back(nn::make_down(params_, arch_.channels_at(l), arch_.channels_at(l + 1)));
    }
    mid_ = nn::ResBlock::make(params_, arch_.channels_at(arch_.depth), arch_.channels_at(arch_.depth), tdim);
    for (int l = arch_.depth - 1; l >= 0; --l)
        dec_.push_back(nn::ResBlock::make(params_, arch_.channels_at(l + 1) + arch_.channels_at(l), arch_.channels_at(l), tdim));
    head_ = nn::make_conv(params_, arch_.channels_at(0), arch_.in_channels);
}

template <class T>
typename DenoiserNet<T>::Var DenoiserNet<T>::forward(nn::Graph<T>& g, Var x, Var cond,
                                                     std::span<const int> timesteps) const {
    const nn::Shape xs = g.shape(x);
    require(xs.c == arch_.in_channels, ErrorCode::ShapeMismatch, "denoiser input channels");
    require(static_cast<std::size_t>(xs.n) == timesteps.size(), ErrorCode::ShapeMismatch, "one timestep per sample");
    const int factor = 1 << arch_.depth;
    require(xs.h % factor == 0 && xs.w % factor == 0, ErrorCode::ShapeMismatch,
            "spatial size must be divisible by 2^depth");
    if (arch_.cond_channels > 0) {
        require(cond >= 0, ErrorCode::MissingCondition, "conditional denoiser needs a condition");
        const nn::Shape cs = g.shape(cond);
        require(cs.c == arch_.cond_channels && cs.n == xs.n && cs.h == xs.h && cs.w == xs.w, ErrorCode::ShapeMismatch,
                "condition shape");
    }

    nn::Tensor<T> emb(nn::Shape{arch_.embed_dim, xs.n, 1, 1});
    for (int n = 0; n < xs.n; ++n) {
        const auto e = timestep_embedding(timesteps[static_cast<std::size_t>(n)], arch_.embed_dim);
        for (int i = 0; i < arch_.embed_dim; ++i) emb.data[static_cast<std::size_t>(i) * xs.n + n] = static_cast<T>(e[i]);
    }
    const Var temb = g.linear(g.silu(g.linear(g.input(std::move(emb)), time1_)), time2_);
    const Var temb_act = g.silu(temb);

    Var h = g.conv2d(arch_.cond_channels > 0 ? g.concat(x, cond) : x, stem_);
    std::vector<Var> skips;
    for (int l = 0; l < arch_.depth; ++l) {
        h = enc_[static_cast<std::size_t>(l)].forward(g, h, temb_act);
        skips.push_back(h);
        h = g.conv2d(h, down_[static_cast<std::size_t>(l)]);
    }
    h = mid_.forward(g, h, temb_act);
    for (int i = 0; i < arch_.depth; ++i) {
        const Var skip = skips[static_cast<std::size_t>(arch_.depth - 1 - i)];
        h = dec_[static_cast<std::size_t>(i)].forward(g, g.concat(g.upsample2(h), skip), temb_act);
    }
    return g.conv2d(h, head_);
}

template class DenoiserNet<float>;
template class DenoiserNet<double>;

Denoiser::Denoiser(const DenoiserArch& arch, std::span<const float> parameters) : net_(arch) {
    net_.params().assign(parameters);
}

std::vector<ImageTensor> Denoiser::predict(std::span<const ImageTensor> x_t, int t,
                                           std::span<const ImageTensor> conds) const {
    const auto& a = net_.arch();
    require(conds.empty() == (a.cond_channels == 0), a.cond_channels ? ErrorCode::MissingCondition : ErrorCode::InvalidConfig,
            "condition presence does not match the model");
    require(conds.empty() || conds.size() == x_t.size(), ErrorCode::ShapeMismatch, "one condition per input");
    std::vector<ImageTensor> out;
    out.reserve(x_t.size());
    const std::size_t chunk = std::max<std::size_t>(1, max_batch);
    for (std::size_t start = 0; start < x_t.size(); start += chunk) {
        const std::size_t count = std::min(chunk, x_t.size() - start);
        const ImageTensor& first = x_t[start];
        require(first.channels == a.in_channels, ErrorCode::ShapeMismatch, "input channels do not match the model");
        std::vector<std::vector<double>> xs, cs;
        std::vector<int> ts(count, t);
        for (std::size_t i = 0; i < count; ++i) {
            const ImageTensor& xi = x_t[start + i];
            require(xi.same_shape(first), ErrorCode::ShapeMismatch, "batch items must share a shape");
            xs.push_back(xi.data);
            if (!conds.empty()) {
                const ImageTensor& ci = conds[start + i];
                require(ci.channels == a.cond_channels && ci.height == first.height && ci.width == first.width,
                        ErrorCode::ShapeMismatch, "condition shape does not match input");
                cs.push_back(ci.data);
            }
        }
        nn::Graph<float> g(net_.params());
        const auto xv = g.input(nn::pack_batch<float>(xs, first.channels, first.height, first.width));
        const auto cv = cs.empty() ? -1 : g.input(nn::pack_batch<float>(cs, a.cond_channels, first.height, first.width));
        const auto y = net_.forward(g, xv, cv, ts);
        for (std::size_t i = 0; i < count; ++i) {
            ImageTensor eps(first.channels, first.height, first.width);
            eps.data = nn::unpack_item(g.value(y), static_cast<int>(i));
            out.push_back(std::move(eps));
        }
    }
    return out;
}

Denoiser init_denoiser(const DenoiserArch& arch, std::uint64_t seed) {
    DenoiserNet<float> net(arch);
    net.params().initialize(seed);
    return Denoiser(arch, net.params().values());
}

}  // namespace polypgen::denoiser
