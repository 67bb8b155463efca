#include "orchard/proposals.hpp"

#include "orchard/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <unordered_map>

namespace orchard {

AnchorConfig AnchorConfig::fruit_preset()
{
    AnchorConfig cfg;
    cfg.scales = {32.0, 64.0, 128.0};
    return cfg;
}

void AnchorConfig::validate() const
{
    if (stride < 1)
        throw InvalidArgument("anchor stride must be >= 1");
    if (scales.empty() || ratios.empty())
        throw InvalidArgument("anchor scales and ratios must be non-empty");
    for (double s : scales)
        if (!(s > 0.0))
            throw InvalidArgument("anchor scales must be positive");
    for (double r : ratios)
        if (!(r > 0.0))
            throw InvalidArgument("anchor ratios must be positive");
}

bool detection_order(const Detection& a, const Detection& b) noexcept
{
    if (a.score != b.score)
        return a.score > b.score;
    if (a.box != b.box)
        return canonical_less(a.box, b.box);
    return a.label < b.label;
}

void sort_canonical(std::vector<Detection>& dets)
{
    std::sort(dets.begin(), dets.end(), detection_order);
}

void ProposalConfig::validate() const
{
    if (top_n < 1)
        throw InvalidArgument("top_n must be >= 1");
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0))
        throw InvalidArgument("nms_iou must lie in [0, 1]");
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0))
        throw InvalidArgument("score_threshold must lie in [0, 1]");
}

Size feature_map_size(Size image, int stride)
{
    if (stride < 1)
        throw InvalidArgument("stride must be >= 1");
    return {image.width / stride, image.height / stride};
}

std::vector<Box> generate_anchors(int feat_width, int feat_height, const AnchorConfig& cfg)
{
    cfg.validate();
    if (feat_width < 1 || feat_height < 1)
        throw InvalidArgument("feature map must be at least 1x1");

    // Per-cell template, centred at the origin.
    std::vector<Box> shapes;
    shapes.reserve(cfg.scales.size() * cfg.ratios.size());
    for (double s : cfg.scales) {
        for (double r : cfg.ratios) {
            const double root = std::sqrt(r);
            const double hw = 0.5 * s / root;
            const double hh = 0.5 * s * root;
            shapes.push_back({-hw, -hh, hw, hh});
        }
    }

    std::vector<Box> anchors;
    anchors.reserve(std::size_t(feat_width) * std::size_t(feat_height) * shapes.size());
    for (int j = 0; j < feat_height; ++j) {
        const double cy = (j + 0.5) * cfg.stride;
        for (int i = 0; i < feat_width; ++i) {
            const double cx = (i + 0.5) * cfg.stride;
            for (const Box& s : shapes)
                anchors.push_back(translate_box(s, cx, cy));
        }
    }
    return anchors;
}

BoxDelta encode_box(const Box& gt, const Box& anchor)
{
    const double wa = anchor.width(), ha = anchor.height();
    const double w = gt.width(), h = gt.height();
    if (!(wa > 0.0 && ha > 0.0))
        throw InvalidArgument("encode_box: anchor must have positive width and height");
    if (!(w > 0.0 && h > 0.0))
        throw InvalidArgument("encode_box: ground truth must have positive width and height");
    return {(gt.center_x() - anchor.center_x()) / wa, (gt.center_y() - anchor.center_y()) / ha,
            std::log(w / wa), std::log(h / ha)};
}

Box decode_box(const BoxDelta& d, const Box& anchor)
{
    const double wa = anchor.width(), ha = anchor.height();
    if (!(wa > 0.0 && ha > 0.0))
        throw InvalidArgument("decode_box: anchor must have positive width and height");
    if (!std::isfinite(d.tx) || !std::isfinite(d.ty) || !std::isfinite(d.tw) ||
        !std::isfinite(d.th))
        throw InvalidArgument("decode_box: delta must be finite");
    const double cx = anchor.center_x() + d.tx * wa;
    const double cy = anchor.center_y() + d.ty * ha;
    const double w = wa * std::exp(d.tw);
    const double h = ha * std::exp(d.th);
    if (!(w > 0.0 && h > 0.0) || !std::isfinite(w) || !std::isfinite(h))
        throw InvalidArgument("decode_box: delta produces a degenerate box");
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

namespace {

// Uniform grid over kept boxes so each candidate is only tested against kept
// boxes it can overlap. IoU > t >= 0 needs positive intersection, so boxes
// sharing no cell can never suppress each other.
class KeptIndex {
public:
    explicit KeptIndex(double cell) : cell_(cell) {}

    template <typename Fn>
    bool any_of(const Box& b, Fn&& pred) const
    {
        auto [x0, y0, x1, y1] = cells(b);
        ++stamp_;
        for (long long cy = y0; cy <= y1; ++cy) {
            for (long long cx = x0; cx <= x1; ++cx) {
                auto it = grid_.find(key(cx, cy));
                if (it == grid_.end())
                    continue;
                for (std::size_t idx : it->second) {
                    if (seen_.size() <= idx)
                        seen_.resize(idx + 1, 0);
                    if (seen_[idx] == stamp_)
                        continue;
                    seen_[idx] = stamp_;
                    if (pred(idx))
                        return true;
                }
            }
        }
        return false;
    }

    void insert(const Box& b, std::size_t idx)
    {
        auto [x0, y0, x1, y1] = cells(b);
        for (long long cy = y0; cy <= y1; ++cy)
            for (long long cx = x0; cx <= x1; ++cx)
                grid_[key(cx, cy)].push_back(idx);
    }

private:
    std::tuple<long long, long long, long long, long long> cells(const Box& b) const
    {
        return {(long long)std::floor(b.x_min / cell_), (long long)std::floor(b.y_min / cell_),
                (long long)std::floor(b.x_max / cell_), (long long)std::floor(b.y_max / cell_)};
    }

    static std::uint64_t key(long long cx, long long cy)
    {
        return (std::uint64_t(std::uint32_t(cx)) << 32) | std::uint32_t(cy);
    }

    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid_;
    mutable std::vector<unsigned> seen_;
    mutable unsigned stamp_ = 0;
};

double grid_cell_size(std::span<const Detection> dets)
{
    std::vector<double> sides;
    sides.reserve(dets.size());
    for (const auto& d : dets)
        sides.push_back(std::max(d.box.width(), d.box.height()));
    auto mid = sides.begin() + sides.size() / 2;
    std::nth_element(sides.begin(), mid, sides.end());
    return std::max(*mid, 1.0);
}

bool finite_box(const Box& b)
{
    return std::isfinite(b.x_min) && std::isfinite(b.y_min) && std::isfinite(b.x_max) &&
           std::isfinite(b.y_max);
}

} // namespace

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold)
{
    std::vector<Detection> sorted(dets.begin(), dets.end());
    sort_canonical(sorted);
    std::vector<Detection> kept;
    if (sorted.empty())
        return kept;

    const double cell = grid_cell_size(sorted);
    const bool indexable = std::all_of(sorted.begin(), sorted.end(), [&](const Detection& d) {
        if (!finite_box(d.box))
            return false;
        const double span = (d.box.width() / cell + 2.0) * (d.box.height() / cell + 2.0);
        return span <= 4096.0;
    });
    if (!indexable) {
        for (auto& d : sorted) {
            const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
                return iou(k.box, d.box) > iou_threshold;
            });
            if (!suppressed)
                kept.push_back(std::move(d));
        }
        return kept;
    }

    KeptIndex index(cell);
    for (auto& d : sorted) {
        const bool suppressed = index.any_of(
            d.box, [&](std::size_t k) { return iou(kept[k].box, d.box) > iou_threshold; });
        if (suppressed)
            continue;
        index.insert(d.box, kept.size());
        kept.push_back(std::move(d));
    }
    return kept;
}

std::vector<Detection> select_top(std::span<const Detection> dets, int top_n)
{
    if (top_n < 1)
        throw InvalidArgument("top_n must be >= 1");
    std::vector<Detection> out(dets.begin(), dets.end());
    const auto n = std::min(out.size(), std::size_t(top_n));
    std::partial_sort(out.begin(), out.begin() + std::ptrdiff_t(n), out.end(), detection_order);
    out.resize(n);
    return out;
}

} // namespace orchard
