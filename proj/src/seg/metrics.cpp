#include "polypgen/seg/metrics.hpp"

namespace polypgen::seg {

double dice_loss(std::span<const double> pred, std::span<const std::uint8_t> target, double eps) {
    require(pred.size() == target.size(), ErrorCode::ShapeMismatch, "dice_loss operands differ in size");
    require(eps > 0.0, ErrorCode::InvalidConfig, "dice eps must be positive");
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double t = target[i] ? 1.0 : 0.0;
        inter += pred[i] * t;
        sp += pred[i];
        st += t;
    }
    return 1.0 - (2.0 * inter + eps) / (sp + st + eps);
}

double dice_loss(const ImageTensor& pred, const BinaryMask& target, double eps) {
    require(pred.channels == 1 && pred.height == target.height && pred.width == target.width, ErrorCode::ShapeMismatch,
            "dice_loss expects a single-channel prediction matching the mask");
    return dice_loss(pred.data, target.data, eps);
}

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& target) {
    require(pred.same_shape(target), ErrorCode::ShapeMismatch, "prediction and target differ in size");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.data[i] != 0, t = target.data[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

SegMetricSet metrics_from_counts(const ConfusionCounts& c) {
    const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const bool empty_empty = c.tp == 0 && c.fp == 0 && c.fn == 0;
    auto ratio = [&](double num, double den) { return empty_empty ? 1.0 : den == 0.0 ? 0.0 : num / den; };
    SegMetricSet m;
    m.iou = ratio(tp, tp + fp + fn);
    m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    m.precision = ratio(tp, tp + fp);
    m.accuracy = c.total() == 0 ? 1.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return m;
}

SegMetricSet micro_metrics(std::span<const ConfusionCounts> counts) {
    if (counts.empty()) throw Error(ErrorCode::EmptyList, "micro_metrics needs at least one image");
    ConfusionCounts sum;
    for (const auto& c : counts) sum += c;
    return metrics_from_counts(sum);
}

SegMetricSet micro_imagewise_metrics(std::span<const ConfusionCounts> counts) {
    if (counts.empty()) throw Error(ErrorCode::EmptyList, "micro_imagewise_metrics needs at least one image");
    SegMetricSet acc;
    for (const auto& c : counts) {
        const SegMetricSet m = metrics_from_counts(c);
        acc.iou += m.iou;
        acc.f1 += m.f1;
        acc.accuracy += m.accuracy;
        acc.precision += m.precision;
    }
    const double n = static_cast<double>(counts.size());
    return {acc.iou / n, acc.f1 / n, acc.accuracy / n, acc.precision / n};
}

}  // namespace polypgen::seg
