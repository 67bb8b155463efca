#pragma once

#include "orchard/geometry.hpp"

#include <span>
#include <string>
#include <vector>

namespace orchard {

/// Backbone sub-sampling factor of ZF / VGG16 conv features.
inline constexpr int kFeatureStride = 16;

struct AnchorConfig {
    int stride = kFeatureStride;
    std::vector<double> scales{128.0, 256.0, 512.0};
    /// height / width
    std::vector<double> ratios{0.5, 1.0, 2.0};

    /// Smaller anchors sized for 26-37 px orchard fruit.
    static AnchorConfig fruit_preset();

    void validate() const;
};

struct BoxDelta {
    double tx = 0.0;
    double ty = 0.0;
    double tw = 0.0;
    double th = 0.0;
};

struct Detection {
    Box box;
    double score = 0.0;
    std::string label = "fruit";

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Score descending, then canonical box order, then label. Total order used
/// wherever detection lists are sorted.
bool detection_order(const Detection& a, const Detection& b) noexcept;

void sort_canonical(std::vector<Detection>& dets);

struct ProposalConfig {
    int top_n = 300;
    double nms_iou = 0.3;
    double score_threshold = 0.0;

    void validate() const;
};

/// Feature map extent for an input image: floor(dim / stride) per axis.
Size feature_map_size(Size image, int stride = kFeatureStride);

/// Row-major over cells, then scales, then ratios. Cell (i, j) is centred at
/// ((i + 0.5) * stride, (j + 0.5) * stride). Anchors are not clipped.
std::vector<Box> generate_anchors(int feat_width, int feat_height, const AnchorConfig& cfg);

/// R-CNN box parameterisation relative to an anchor.
BoxDelta encode_box(const Box& gt, const Box& anchor);
Box decode_box(const BoxDelta& delta, const Box& anchor);

/// Greedy single-class NMS. A candidate is suppressed when its IoU with an
/// already kept detection is strictly greater than `iou_threshold`.
/// Output is in canonical order and independent of input order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

/// The `top_n` best detections in canonical order.
std::vector<Detection> select_top(std::span<const Detection> dets, int top_n);

} // namespace orchard
