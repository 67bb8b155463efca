#pragma once

#include "orchard/dataset.hpp"
#include "orchard/detector.hpp"
#include "orchard/proposals.hpp"

#include <json.hpp>

#include <vector>

namespace orchard {

struct TilingConfig {
    Size tile_size{500, 500};
    /// Should exceed the largest fruit so every fruit is whole in some tile.
    int overlap = 50;
    /// score_threshold and nms_iou are applied at fusion.
    ProposalConfig proposal{};
    /// Tiles dispatched to the detector concurrently.
    int parallelism = 1;

    void validate() const;
};

struct TilePlan {
    Size image_size;
    /// Row-major tile rects in raw-image coordinates.
    std::vector<Box> tiles;

    nlohmann::json to_json() const;
};

/// Tile origins every (tile - overlap) pixels from 0 along each axis; a last
/// tile is clamped flush to the far edge when the stride would overrun it.
TilePlan plan_tiles(Size image, const TilingConfig& cfg);

/// Runs `detector` on every tile and pools the detections in raw-image
/// coordinates, canonically sorted. No thresholding or NMS.
std::vector<Detection> run_tiled(const ImageRecord& record, const TilePlan& plan,
                                 Detector& detector, int parallelism = 1);

/// Drops detections below score_threshold, then NMS at nms_iou.
std::vector<Detection> fuse(std::span<const Detection> pooled, const TilingConfig& cfg);

} // namespace orchard
