#include "polypgen/seg/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include <nlohmann/json.hpp>

#include "polypgen/io/container.hpp"
#include "polypgen/nn/adam.hpp"
#include "polypgen/seeding.hpp"

using nlohmann::json;

namespace polypgen::seg {

std::string_view seg_model_name(SegModelKind k) {
    switch (k) {
        case SegModelKind::unet_small: return "unet_small";
        case SegModelKind::unet_plus_small: return "unet_plus_small";
        case SegModelKind::fpn_small: return "fpn_small";
        case SegModelKind::deeplab_like_small: return "deeplab_like_small";
    }
    return "unknown";
}

SegModelKind parse_seg_model(std::string_view s) {
    for (auto k : kAllSegModels)
        if (seg_model_name(k) == s) return k;
    throw Error(ErrorCode::InvalidConfig, "unknown segmentation model: " + std::string(s));
}

void SegArch::validate() const {
    require(in_channels >= 1, ErrorCode::InvalidArch, "segmenter in_channels must be positive");
    require(width >= 1 && width <= 128, ErrorCode::InvalidArch, "segmenter width out of range");
}

template <class T>
SegmenterNet<T>::SegmenterNet(const SegArch& arch) : arch_(arch) {
    arch_.validate();
    const int w = arch_.width, in = arch_.in_channels;
    auto block = [&](int cin, int cout, int dil = 1) { blocks_.push_back(nn::ResBlock::make(params_, cin, cout, 0, dil)); };
    auto conv = [&](int cin, int cout, int k, int dil = 1) { convs_.push_back(nn::make_conv(params_, cin, cout, k, 1, dil)); };

    // Shared three-level encoder: blocks_[0..2] at full, half and quarter
    // resolution, convs_[0..1] the stride-2 transitions.
    block(in, w);
    convs_.push_back(nn::make_down(params_, w, 2 * w));
    block(2 * w, 2 * w);
    convs_.push_back(nn::make_down(params_, 2 * w, 4 * w));
    block(4 * w, 4 * w);

    switch (arch_.kind) {
        case SegModelKind::unet_small:
            block(4 * w + 2 * w, 2 * w);
            block(2 * w + w, w);
            conv(w, 1, 1);
            break;
        case SegModelKind::unet_plus_small:
            block(w + 2 * w, w);          // X01
            block(2 * w + 4 * w, 2 * w);  // X11
            block(w + w + 2 * w, w);      // X02
            conv(w, 1, 1);
            break;
        case SegModelKind::fpn_small:
            conv(w, w, 1);  // laterals for the three encoder levels
            conv(2 * w, w, 1);
            conv(4 * w, w, 1);
            block(w, w);
            conv(w, 1, 1);
            break;
        case SegModelKind::deeplab_like_small:
            conv(4 * w, 2 * w, 1);  // atrous branches at rates 1, 2, 4
            conv(4 * w, 2 * w, 3, 2);
            conv(4 * w, 2 * w, 3, 4);
            conv(6 * w, 2 * w, 1);  // fuse
            block(2 * w + w, w);
            conv(w, 1, 1);
            break;
    }
}

template <class T>
typename SegmenterNet<T>::Var SegmenterNet<T>::forward(nn::Graph<T>& g, Var x) const {
    const nn::Shape s = g.shape(x);
    require(s.c == arch_.in_channels, ErrorCode::ShapeMismatch, "segmenter input channels");
    require(s.h % 4 == 0 && s.w % 4 == 0, ErrorCode::ShapeMismatch, "segmenter input sides must be divisible by 4");
    switch (arch_.kind) {
        case SegModelKind::unet_small: return forward_unet(g, x);
        case SegModelKind::unet_plus_small: return forward_unet_plus(g, x);
        case SegModelKind::fpn_small: return forward_fpn(g, x);
        case SegModelKind::deeplab_like_small: return forward_deeplab(g, x);
    }
    throw Error(ErrorCode::InvalidArch, "unknown segmenter kind");
}

template <class T>
typename SegmenterNet<T>::Var SegmenterNet<T>::forward_unet(nn::Graph<T>& g, Var x) const {
    const Var e0 = blocks_[0].forward(g, x);
    const Var e1 = blocks_[1].forward(g, g.conv2d(e0, convs_[0]));
    const Var e2 = blocks_[2].forward(g, g.conv2d(e1, convs_[1]));
    const Var d1 = blocks_[3].forward(g, g.concat(g.upsample2(e2), e1));
    const Var d0 = blocks_[4].forward(g, g.concat(g.upsample2(d1), e0));
    return g.conv2d(d0, convs_[2]);
}

template <class T>
typename SegmenterNet<T>::Var SegmenterNet<T>::forward_unet_plus(nn::Graph<T>& g, Var x) const {
    const Var x00 = blocks_[0].forward(g, x);
    const Var x10 = blocks_[1].forward(g, g.conv2d(x00, convs_[0]));
    const Var x20 = blocks_[2].forward(g, g.conv2d(x10, convs_[1]));
    const Var x01 = blocks_[3].forward(g, g.concat(x00, g.upsample2(x10)));
    const Var x11 = blocks_[4].forward(g, g.concat(x10, g.upsample2(x20)));
    const Var parts[3] = {x00, x01, g.upsample2(x11)};
    const Var x02 = blocks_[5].forward(g, g.concat(parts));
    return g.conv2d(x02, convs_[2]);
}

template <class T>
typename SegmenterNet<T>::Var SegmenterNet<T>::forward_fpn(nn::Graph<T>& g, Var x) const {
    const Var c1 = blocks_[0].forward(g, x);
    const Var c2 = blocks_[1].forward(g, g.conv2d(c1, convs_[0]));
    const Var c3 = blocks_[2].forward(g, g.conv2d(c2, convs_[1]));
    const Var p3 = g.conv2d(c3, convs_[4]);
    const Var p2 = g.add(g.conv2d(c2, convs_[3]), g.upsample2(p3));
    const Var p1 = g.add(g.conv2d(c1, convs_[2]), g.upsample2(p2));
    return g.conv2d(blocks_[3].forward(g, p1), convs_[5]);
}

template <class T>
typename SegmenterNet<T>::Var SegmenterNet<T>::forward_deeplab(nn::Graph<T>& g, Var x) const {
    const Var low = blocks_[0].forward(g, x);
    const Var mid = blocks_[1].forward(g, g.conv2d(low, convs_[0]));
    const Var deep = blocks_[2].forward(g, g.conv2d(mid, convs_[1]));
    const Var branches[3] = {g.silu(g.conv2d(deep, convs_[2])), g.silu(g.conv2d(deep, convs_[3])),
                             g.silu(g.conv2d(deep, convs_[4]))};
    const Var fused = g.silu(g.conv2d(g.concat(branches), convs_[5]));
    const Var up = g.upsample2(g.upsample2(fused));
    return g.conv2d(blocks_[3].forward(g, g.concat(up, low)), convs_[6]);
}

template class SegmenterNet<float>;
template class SegmenterNet<double>;

void SegTrainConfig::validate() const {
    arch.validate();
    require(learning_rate > 0.0, ErrorCode::InvalidConfig, "segmenter learning_rate must be positive");
    require(epochs >= 1, ErrorCode::InvalidConfig, "segmenter epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::InvalidConfig, "segmenter batch_size must be >= 1");
}

namespace {

json header_of(const SegCheckpoint& c) {
    return json{{"model", seg_model_name(c.arch.kind)},
                {"in_channels", c.arch.in_channels},
                {"width", c.arch.width},
                {"resolution", c.resolution},
                {"epoch", c.epoch},
                {"train_loss", c.train_loss},
                {"seed", c.seed}};
}

// Batch Dice loss on sigmoid outputs; fills d(loss)/d(prob).
double batch_dice(std::span<const float> prob, std::span<const float> target, std::vector<float>& dprob) {
    double inter = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        inter += static_cast<double>(prob[i]) * target[i];
        sum += static_cast<double>(prob[i]) + target[i];
    }
    const double num = 2.0 * inter + kDiceEps, den = sum + kDiceEps;
    dprob.resize(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i)
        dprob[i] = static_cast<float>(-(2.0 * target[i] * den - num) / (den * den));
    return 1.0 - num / den;
}

std::vector<double> mask_values(const BinaryMask& m) {
    std::vector<double> v(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) v[i] = m.data[i] ? 1.0 : 0.0;
    return v;
}

}  // namespace

std::string SegCheckpoint::digest() const { return io::container_digest(kSegmenterMagic, header_of(*this), parameters); }

void save_segmenter(const SegCheckpoint& ckpt, const std::filesystem::path& path) {
    io::write_container(path, kSegmenterMagic, header_of(ckpt), ckpt.parameters);
}

SegCheckpoint load_segmenter(const std::filesystem::path& path) {
    io::Container c = io::read_container(path, kSegmenterMagic);
    SegCheckpoint ckpt;
    try {
        const json& h = c.header;
        ckpt.arch.kind = parse_seg_model(h.at("model").get<std::string>());
        ckpt.arch.in_channels = h.at("in_channels").get<int>();
        ckpt.arch.width = h.at("width").get<int>();
        ckpt.resolution = h.at("resolution").get<int>();
        ckpt.epoch = h.at("epoch").get<int>();
        ckpt.train_loss = h.at("train_loss").get<double>();
        ckpt.seed = h.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    ckpt.arch.validate();
    ckpt.parameters = std::move(c.parameters);
    if (SegmenterNet<float>(ckpt.arch).params().size() != ckpt.parameters.size())
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": parameter count does not match architecture");
    return ckpt;
}

SegTrainResult train_segmenter(const data::PairedDataset& train, const SegTrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw Error(ErrorCode::EmptyDataset, "segmentation training set is empty");
    const ImageTensor& proto = train.samples.front().image;
    require(proto.channels == cfg.arch.in_channels, ErrorCode::ShapeMismatch, "image channels do not match segmenter");
    for (const auto& s : train.samples)
        require(s.image.same_shape(proto) && s.mask.height == proto.height && s.mask.width == proto.width,
                ErrorCode::ShapeMismatch, "training pairs must share one shape");

    SegmenterNet<float> net(cfg.arch);
    net.params().initialize(derive_seed(cfg.seed, streams::init));
    nn::Adam<float> opt(net.params().size(), nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(derive_seed(cfg.seed, streams::data));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    SegTrainResult result;
    SegCheckpoint& best = result.best;
    best.arch = cfg.arch;
    best.resolution = proto.height;
    best.seed = cfg.seed;
    best.train_loss = std::numeric_limits<double>::infinity();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<float> dprob;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t count = std::min(batch, order.size() - start);
            std::vector<std::vector<double>> xs, ts;
            for (std::size_t i = 0; i < count; ++i) {
                const auto& s = train.samples[order[start + i]];
                xs.push_back(s.image.data);
                ts.push_back(mask_values(s.mask));
            }
            const auto target = nn::pack_batch<float>(ts, 1, proto.height, proto.width);
            net.params().zero_grad();
            nn::Graph<float> g(net.params());
            const auto prob = g.sigmoid(net.forward(g, g.input(nn::pack_batch<float>(xs, proto.channels, proto.height, proto.width))));
            const double loss = batch_dice(g.value(prob).data, target.data, dprob);
            if (!std::isfinite(loss))
                throw Error(ErrorCode::NonFiniteLoss, "segmenter loss " + std::to_string(loss) + " in epoch " + std::to_string(epoch));
            g.backward(prob, dprob);
            opt.step(net.params());
            loss_sum += loss * static_cast<double>(count);
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        result.epoch_loss.push_back(epoch_loss);
        // Weights after this epoch's updates; strict < keeps the earliest on ties.
        if (epoch_loss < best.train_loss) {
            best.train_loss = epoch_loss;
            best.epoch = epoch;
            best.parameters.assign(net.params().values().begin(), net.params().values().end());
        }
    }
    return result;
}

std::vector<ImageTensor> predict_probabilities(const SegCheckpoint& ckpt, std::span<const ImageTensor> images) {
    SegmenterNet<float> net(ckpt.arch);
    net.params().assign(std::span<const float>(ckpt.parameters));
    std::vector<ImageTensor> out;
    out.reserve(images.size());
    constexpr std::size_t chunk = 32;
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        const std::size_t count = std::min(chunk, images.size() - start);
        const ImageTensor& first = images[start];
        std::vector<std::vector<double>> xs;
        for (std::size_t i = 0; i < count; ++i) {
            require(images[start + i].same_shape(first), ErrorCode::ShapeMismatch, "batch items must share a shape");
            xs.push_back(images[start + i].data);
        }
        nn::Graph<float> g(std::as_const(net.params()));
        const auto p = g.sigmoid(net.forward(g, g.input(nn::pack_batch<float>(xs, first.channels, first.height, first.width))));
        for (std::size_t i = 0; i < count; ++i) {
            ImageTensor t(1, first.height, first.width);
            t.data = nn::unpack_item(g.value(p), static_cast<int>(i));
            out.push_back(std::move(t));
        }
    }
    return out;
}

SegEvaluation evaluate_predictions(std::span<const BinaryMask> predictions, const data::PairedDataset& test) {
    if (test.empty()) throw Error(ErrorCode::EmptyDataset, "segmentation test set is empty");
    require(predictions.size() == test.size(), ErrorCode::ShapeMismatch, "one prediction per test image required");
    SegEvaluation ev;
    std::vector<ConfusionCounts> counts;
    counts.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const ConfusionCounts c = confusion_counts(predictions[i], test.samples[i].mask);
        counts.push_back(c);
        ev.per_image.push_back({test.samples[i].id, c, metrics_from_counts(c)});
    }
    ev.micro = micro_metrics(counts);
    ev.imagewise = micro_imagewise_metrics(counts);
    return ev;
}

SegEvaluation evaluate_segmenter(const SegCheckpoint& ckpt, const data::PairedDataset& test, double threshold) {
    if (test.empty()) throw Error(ErrorCode::EmptyDataset, "segmentation test set is empty");
    const auto probs = predict_probabilities(ckpt, test.images());
    std::vector<BinaryMask> preds;
    preds.reserve(probs.size());
    for (const auto& p : probs) preds.push_back(data::binarize_mask(p, threshold));
    return evaluate_predictions(preds, test);
}

void write_audit_csv(std::span<const ImageAudit> rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.precision(10);
    out << "id,tp,fp,fn,tn,iou,f1,accuracy,precision\n";
    for (const auto& r : rows)
        out << r.id << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ','
            << r.metrics.iou << ',' << r.metrics.f1 << ',' << r.metrics.accuracy << ',' << r.metrics.precision << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

}  // namespace polypgen::seg
