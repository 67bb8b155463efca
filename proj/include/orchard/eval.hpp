#pragma once

#include "orchard/dataset.hpp"
#include "orchard/detector.hpp"
#include "orchard/proposals.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace orchard {

struct MatchConfig {
    /// A pair matches when IoU >= iou_threshold.
    double iou_threshold = 0.2;
    bool one_to_one = true;

    void validate() const;
};

struct MatchedPair {
    Detection detection;
    Box ground_truth;
};

struct MatchResult {
    std::vector<MatchedPair> tp;
    std::vector<Detection> fp;
    std::vector<Box> fn;

    double precision() const noexcept;
    double recall() const noexcept;
};

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
};

/// Points ordered by descending threshold; recall is non-decreasing.
struct PRCurve {
    std::vector<PRPoint> points;
    std::size_t total_ground_truth = 0;
};

struct Metrics {
    double ap = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double operating_threshold = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    nlohmann::json to_json() const;
};

struct AblationRow {
    int n_train = 0;
    int repeats = 0;
    double ap_mean = 0.0;
    double ap_std = 0.0;
    std::vector<double> samples;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Detections and ground truth for one image.
struct ImageEval {
    std::vector<Detection> detections;
    std::vector<Box> ground_truth;
};

/// Greedy one-to-one matching in canonical detection order: each detection
/// takes the unmatched ground truth of highest IoU, if that IoU reaches the
/// threshold. Ties on IoU go to the lower ground-truth index.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gts,
                             const MatchConfig& cfg);

/// Pools detections over images and emits one point per distinct score.
/// Throws InvalidArgument when there is no ground truth at all.
PRCurve pr_curve(std::span<const ImageEval> per_image, const MatchConfig& cfg);

/// Area under the monotone precision envelope (all-points interpolation).
double average_precision(const PRCurve& curve);

double f1_score(double precision, double recall) noexcept;

/// F1-maximising point; ties go to the lower threshold.
/// Throws InvalidArgument on an empty curve.
std::pair<double, Metrics> select_operating_threshold(const PRCurve& curve);

/// Pooled counts and P/R/F1 with detections scoring >= threshold; `ap` is
/// over the full curve and ignores the threshold.
Metrics evaluate_at_threshold(std::span<const ImageEval> per_image, double threshold,
                              const MatchConfig& cfg, bool relax = false);

/// Removes from fn every ground truth reaching the IoU threshold against a
/// matched detection; tp and fp are untouched.
MatchResult relax_clusters(const MatchResult& result, const MatchConfig& cfg);

/// Header `threshold,precision,recall`, six decimals, thresholds descending.
std::string pr_curve_csv(const PRCurve& curve);

// ---------------------------------------------------------------------------
// Training-set-size ablation

/// Builds the detector spec for one draw. Receives the subset size, the drawn
/// training records and a seed unique to the draw.
using DetectorFactory = std::function<DetectorSpec(
    int n_train, const std::vector<ImageRecord>& subset, std::uint64_t draw_seed)>;

struct AblationConfig {
    std::vector<int> sizes;
    int repeats = 10;
    std::uint64_t seed = 0;
    MatchConfig match{};
    /// Threshold + NMS applied to raw detector output on each test image.
    ProposalConfig proposal{};
};

/// For each size: `repeats` subsets of the training split, a detector per
/// subset, AP on the test split; mean and sample standard deviation.
AblationReport ablate(const Manifest& manifest, const AblationConfig& cfg,
                      const DetectorFactory& factory);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

} // namespace orchard
