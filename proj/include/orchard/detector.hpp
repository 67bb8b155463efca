#pragma once

#include "orchard/dataset.hpp"
#include "orchard/proposals.hpp"
#include "orchard/raster.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace orchard {

struct DetectRequest {
    std::string image_id;
    /// Raster locator forwarded to external detectors.
    std::string image_path;
    /// Region of the raw image, in raw-image pixels.
    Box rect;
    const Image* pixels = nullptr;
};

struct ScoreRange {
    double lo = 0.0;
    double hi = 1.0;
};

/// Noise model of the synthetic detector. Every draw is seeded, never
/// time- or order-dependent.
struct OracleNoise {
    /// Probability that a ground-truth fruit is missed.
    double drop_rate = 0.0;
    /// Poisson mean of false positives per request region.
    double spurious_rate = 0.0;
    /// Pixels; perturbs centres directly and sizes through log(size).
    double jitter_sigma = 0.0;
    ScoreRange tp_score_range{0.7, 1.0};
    ScoreRange fp_score_range{0.0, 0.6};
    std::uint64_t seed = 0;
    /// A fruit is reported in a region when at least this fraction of it is
    /// visible there. 1.0 reports only fruit wholly inside the region.
    double min_visible_fraction = 1.0;

    void validate() const;
};

struct FileSource {
    std::string path;
};

struct ExternalCommand {
    std::vector<std::string> argv;
    int handshake_timeout_ms = 5000;
    int request_timeout_ms = 60000;
    int pool_size = 1;
};

using DetectorSpec = std::variant<OracleNoise, FileSource, ExternalCommand>;

std::string_view detector_kind(const DetectorSpec& spec) noexcept;

class Detector {
public:
    virtual ~Detector() = default;

    /// Detections in request-rect local coordinates, clipped to the rect,
    /// in canonical order.
    virtual std::vector<Detection> detect(const DetectRequest& request) = 0;
};

/// `ground_truth` backs the oracle kind and must outlive the detector.
/// File and external kinds ignore it.
std::unique_ptr<Detector> make_detector(const DetectorSpec& spec,
                                        const Manifest* ground_truth = nullptr);

/// Synthetic detections for the fruit in `gt` visible in `region`, returned
/// in raw-image coordinates clipped to the region. Per-fruit draws are keyed
/// by (seed, image id, fruit index), so a fruit looks the same from every
/// region that sees it; false positives are keyed by (seed, image id, region).
std::vector<Detection> oracle_detect(std::span<const Box> gt, const OracleNoise& noise,
                                     const Box& region, std::string_view image_id);

/// Whether the oracle keeps fruit `index` of `image_id` (the drop draw alone).
bool oracle_keeps(const OracleNoise& noise, std::string_view image_id, std::size_t index);

// ---------------------------------------------------------------------------
// Detections manifest: {"version":1,"detections":{"<key>":[...]}}

/// Keys are raw image ids, or tile_key() for per-tile entries.
using DetectionMap = std::map<std::string, std::vector<Detection>>;

std::string tile_key(std::string_view image_id, const Box& rect);

DetectionMap load_detections(std::string_view bytes);
DetectionMap load_detections_file(const std::string& path);
/// Canonical: sorted keys, canonical detection order, four-digit rounding.
std::string save_detections(const DetectionMap& dets);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SceneSpec {
    std::string id = "scene";
    std::string path;
    Size image{3296, 2472};
    int fruit = 56;
    double min_side = 26.0;
    double max_side = 50.0;
    /// Fruit placed to overlap an earlier fruit, forming clusters.
    int clustered = 0;
    Split split = Split::test;
    std::uint64_t seed = 0;
};

/// Square fruit boxes placed uniformly. Independent fruit never intersect;
/// clustered fruit overlap exactly one earlier fruit with IoU in [0.25, 0.5].
ImageRecord synthesize_scene(const SceneSpec& spec);

} // namespace orchard
