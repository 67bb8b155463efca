#pragma once

#include "orchard/dataset.hpp"
#include "orchard/raster.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace orchard {

using Rgb = std::array<double, 3>;

/// Principal components of a pixel colour sample.
struct ColorStats {
    Rgb mean{};
    /// eigvecs[row][col]; column k is the k-th principal axis.
    std::array<Rgb, 3> eigvecs{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    /// Descending, non-negative.
    Rgb eigvals{};

    nlohmann::json to_json() const;
    static ColorStats from_json(const nlohmann::json& j);
};

struct AugmentationSpec {
    double flip_probability = 0.5;
    std::vector<int> scale_choices{300, 500, 700};
    /// Uniform U[-a, a] has variance a^2 / 3, so sqrt(0.3) gives variance 0.1.
    double pca_alpha_halfwidth = std::sqrt(0.3);
    bool pca_enabled = true;

    void validate() const;
};

struct AppliedAugmentation {
    bool flipped = false;
    int chosen_shorter_side = 500;
    Rgb alphas{};

    friend bool operator==(const AppliedAugmentation&, const AppliedAugmentation&) = default;
};

/// Mean and eigen-decomposition of the population (divisor N) channel
/// covariance. Throws InvalidArgument for fewer than two pixels.
ColorStats compute_color_stats(std::span<const Rgb> pixels);

/// Draws one augmentation: one flip decision, one scale, one alpha triple.
AppliedAugmentation sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed);

struct Augmented {
    Image image;
    std::vector<Annotation> annotations;
    double factor = 1.0;
};

/// Mirror about the vertical axis: (x0, y0, x1, y1) -> (W - x1, y0, W - x0, y1).
Augmented apply_flip(const Image& image, std::span<const Annotation> annotations);

/// Flips annotations only, for an image of the given width.
std::vector<Annotation> flip_annotations(std::span<const Annotation> annotations, int width);

/// Bilinear rescale so the shorter side equals `target`; annotations are
/// scaled by the same factor and clipped to the output image.
Augmented rescale_shorter_side(const Image& image, std::span<const Annotation> annotations,
                               int target);

/// Output size of rescale_shorter_side: round(dim * factor), shorter side exact.
Size rescaled_size(Size in, int target);

/// Adds eigvecs * (alphas .* eigvals) to every pixel, clamping to [0, 1].
Image apply_pca_jitter(const Image& image, const ColorStats& stats, const Rgb& alphas);

/// The per-channel additive offset apply_pca_jitter uses.
Rgb pca_delta(const ColorStats& stats, const Rgb& alphas);

/// flip -> rescale -> jitter, as sampled by `applied`.
Augmented apply_augmentation(const Image& image, std::span<const Annotation> annotations,
                             const AppliedAugmentation& applied, const ColorStats* stats);

} // namespace orchard
