#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polypgen/data/dataset.hpp"
#include "polypgen/nn/blocks.hpp"
#include "polypgen/seg/metrics.hpp"

namespace polypgen::seg {

/// Desk-scale stand-ins: a plain U-Net, a nested-skip U-Net++ analogue, a
/// feature-pyramid head and a dilated-convolution (ASPP-like) head.
enum class SegModelKind { unet_small, unet_plus_small, fpn_small, deeplab_like_small };

std::string_view seg_model_name(SegModelKind k);
SegModelKind parse_seg_model(std::string_view s);
inline constexpr SegModelKind kAllSegModels[] = {SegModelKind::unet_small, SegModelKind::unet_plus_small,
                                                 SegModelKind::fpn_small, SegModelKind::deeplab_like_small};

struct SegArch {
    SegModelKind kind = SegModelKind::unet_small;
    int in_channels = 3;
    int width = 8;  // encoder width preset; deeper levels double it

    void validate() const;
    friend bool operator==(const SegArch&, const SegArch&) = default;
};

/// Maps [in_channels, n, h, w] images to [1, n, h, w] foreground logits.
/// Spatial sides must be divisible by 4.
template <class T>
class SegmenterNet {
public:
    using Var = typename nn::Graph<T>::Var;

    explicit SegmenterNet(const SegArch& arch);

    const SegArch& arch() const noexcept { return arch_; }
    nn::ParamStore<T>& params() noexcept { return params_; }
    const nn::ParamStore<T>& params() const noexcept { return params_; }

    Var forward(nn::Graph<T>& g, Var x) const;

private:
    Var forward_unet(nn::Graph<T>& g, Var x) const;
    Var forward_unet_plus(nn::Graph<T>& g, Var x) const;
    Var forward_fpn(nn::Graph<T>& g, Var x) const;
    Var forward_deeplab(nn::Graph<T>& g, Var x) const;

    SegArch arch_;
    nn::ParamStore<T> params_;
    std::vector<nn::ResBlock> blocks_;
    std::vector<nn::Conv2d> convs_;
};

struct SegTrainConfig {
    SegArch arch;
    double learning_rate = 1e-4;
    int epochs = 50;
    int batch_size = 8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SegCheckpoint {
    SegArch arch;
    int resolution = 0;
    int epoch = 0;  // epoch the parameters were taken from
    double train_loss = 0.0;
    std::uint64_t seed = 0;
    std::vector<float> parameters;

    std::string digest() const;
};

inline constexpr std::string_view kSegmenterMagic = "PGSGCKPT";

void save_segmenter(const SegCheckpoint& ckpt, const std::filesystem::path& path);
SegCheckpoint load_segmenter(const std::filesystem::path& path);

struct SegTrainResult {
    SegCheckpoint best;              // lowest mean epoch training loss
    std::vector<double> epoch_loss;  // mean Dice loss per epoch
};

/// Adam on the batch Dice loss of sigmoid probabilities; one shuffled pass
/// over the data per epoch.
SegTrainResult train_segmenter(const data::PairedDataset& train, const SegTrainConfig& cfg);

/// Foreground probabilities, one [1 × h × w] grid per image.
std::vector<ImageTensor> predict_probabilities(const SegCheckpoint& ckpt, std::span<const ImageTensor> images);

inline constexpr double kSegThreshold = 0.5;

struct ImageAudit {
    std::string id;
    ConfusionCounts counts;
    SegMetricSet metrics;
};

struct SegEvaluation {
    SegMetricSet micro;
    SegMetricSet imagewise;
    std::vector<ImageAudit> per_image;
};

/// Scores already-binarised predictions against the test masks, in order.
SegEvaluation evaluate_predictions(std::span<const BinaryMask> predictions, const data::PairedDataset& test);

/// Predictions are foreground where probability >= threshold.
SegEvaluation evaluate_segmenter(const SegCheckpoint& ckpt, const data::PairedDataset& test,
                                 double threshold = kSegThreshold);

/// id,tp,fp,fn,tn,iou,f1,accuracy,precision
void write_audit_csv(std::span<const ImageAudit> rows, const std::filesystem::path& path);

}  // namespace polypgen::seg
