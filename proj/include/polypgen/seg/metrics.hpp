#pragma once

#include <cstdint>
#include <span>

#include "polypgen/tensor.hpp"

namespace polypgen::seg {

/// Pixel tallies with foreground as the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct SegMetricSet {
    double iou = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    friend bool operator==(const SegMetricSet&, const SegMetricSet&) = default;
};

inline constexpr double kDiceEps = 1e-6;

/// 1 − (2·Σ p·t + eps) / (Σ p + Σ t + eps); `target` holds 0/1 values.
double dice_loss(std::span<const double> pred, std::span<const std::uint8_t> target, double eps = kDiceEps);
double dice_loss(const ImageTensor& pred, const BinaryMask& target, double eps = kDiceEps);

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& target);

/// Scores from one tuple. When tp = fp = fn = 0 (nothing to find, nothing
/// predicted) IoU, F1 and precision are 1; any other zero denominator gives 0.
SegMetricSet metrics_from_counts(const ConfusionCounts& c);

/// Sum counts over images, then score.
SegMetricSet micro_metrics(std::span<const ConfusionCounts> counts);
/// Score each image, then take the unweighted mean.
SegMetricSet micro_imagewise_metrics(std::span<const ConfusionCounts> counts);

}  // namespace polypgen::seg
