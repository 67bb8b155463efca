#include "orchard/augment.hpp"

#include "orchard/error.hpp"
#include "orchard/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace orchard {

using nlohmann::json;

json ColorStats::to_json() const
{
    json vecs = json::array();
    for (const auto& row : eigvecs)
        vecs.push_back({row[0], row[1], row[2]});
    return {{"mean", {mean[0], mean[1], mean[2]}},
            {"eigvals", {eigvals[0], eigvals[1], eigvals[2]}},
            {"eigvecs", vecs}};
}

ColorStats ColorStats::from_json(const json& j)
{
    try {
        ColorStats s;
        for (int i = 0; i < 3; ++i) {
            s.mean[i] = j.at("mean").at(i).get<double>();
            s.eigvals[i] = j.at("eigvals").at(i).get<double>();
            for (int k = 0; k < 3; ++k)
                s.eigvecs[i][k] = j.at("eigvecs").at(i).at(k).get<double>();
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("colour stats: ") + e.what());
    }
}

void AugmentationSpec::validate() const
{
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
        throw InvalidArgument("flip_probability must lie in [0, 1]");
    if (scale_choices.empty())
        throw InvalidArgument("scale_choices must be non-empty");
    for (int s : scale_choices)
        if (s < 16)
            throw InvalidArgument("scale choices below the 16 px minimum object size: " +
                                  std::to_string(s));
    if (!(pca_alpha_halfwidth >= 0.0))
        throw InvalidArgument("pca_alpha_halfwidth must be non-negative");
}

ColorStats compute_color_stats(std::span<const Rgb> pixels)
{
    if (pixels.size() < 2)
        throw InvalidArgument("colour statistics need at least two pixels");
    const double n = double(pixels.size());

    // Accumulate relative to the first pixel: a constant sample then gives an
    // exactly zero covariance, and large offsets do not cost precision.
    const Eigen::Vector3d ref(pixels[0][0], pixels[0][1], pixels[0][2]);
    Eigen::Vector3d shift = Eigen::Vector3d::Zero();
    for (const auto& p : pixels)
        shift += Eigen::Vector3d(p[0], p[1], p[2]) - ref;
    shift /= n;

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pixels) {
        const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - ref - shift;
        cov.noalias() += d * d.transpose();
    }
    cov /= n;
    const Eigen::Vector3d mean = ref + shift;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    ColorStats s;
    for (int i = 0; i < 3; ++i)
        s.mean[i] = mean[i];
    // Eigen returns ascending eigenvalues.
    for (int k = 0; k < 3; ++k) {
        const int src = 2 - k;
        s.eigvals[k] = std::max(0.0, solver.eigenvalues()[src]);
        Eigen::Vector3d v = solver.eigenvectors().col(src);
        // Fix the sign so the largest-magnitude component is positive.
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0)
            v = -v;
        for (int row = 0; row < 3; ++row)
            s.eigvecs[row][k] = v[row];
    }
    return s;
}

AppliedAugmentation sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Rng rng(seed);
    AppliedAugmentation a;
    a.flipped = rng.bernoulli(spec.flip_probability);
    a.chosen_shorter_side = spec.scale_choices[rng.below(spec.scale_choices.size())];
    for (auto& alpha : a.alphas)
        alpha = spec.pca_enabled
                    ? rng.uniform(-spec.pca_alpha_halfwidth, spec.pca_alpha_halfwidth)
                    : 0.0;
    return a;
}

std::vector<Annotation> flip_annotations(std::span<const Annotation> annotations, int width)
{
    const double w = width;
    std::vector<Annotation> out(annotations.begin(), annotations.end());
    for (auto& a : out) {
        a.box = {w - a.box.x_max, a.box.y_min, w - a.box.x_min, a.box.y_max};
        if (a.circle)
            a.circle->cx = w - a.circle->cx;
    }
    return out;
}

Augmented apply_flip(const Image& image, std::span<const Annotation> annotations)
{
    Augmented out;
    out.image = image;
    const int w = image.width();
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < w / 2; ++x) {
            float* a = out.image.pixel(x, y);
            float* b = out.image.pixel(w - 1 - x, y);
            std::swap_ranges(a, a + 3, b);
        }
    }
    out.annotations = flip_annotations(annotations, w);
    return out;
}

Size rescaled_size(Size in, int target)
{
    if (target < 1)
        throw InvalidArgument("rescale target must be >= 1");
    const int shorter = std::min(in.width, in.height);
    const double f = double(target) / double(shorter);
    Size out{int(std::lround(in.width * f)), int(std::lround(in.height * f))};
    if (in.width <= in.height)
        out.width = target;
    if (in.height <= in.width)
        out.height = target;
    return out;
}

Augmented rescale_shorter_side(const Image& image, std::span<const Annotation> annotations,
                               int target)
{
    const Size in = image.size();
    const Size dst = rescaled_size(in, target);
    const double f = double(target) / double(std::min(in.width, in.height));

    Augmented out;
    out.factor = f;
    if (dst == in) {
        out.image = image;
        out.annotations.assign(annotations.begin(), annotations.end());
        return out;
    }

    out.image = Image(dst.width, dst.height);
    const double sx = double(in.width) / dst.width;
    const double sy = double(in.height) / dst.height;
    for (int y = 0; y < dst.height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(in.height - 1));
        const int y0 = int(fy);
        const int y1 = std::min(y0 + 1, in.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < dst.width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(in.width - 1));
            const int x0 = int(fx);
            const int x1 = std::min(x0 + 1, in.width - 1);
            const double wx = fx - x0;
            const float* p00 = image.pixel(x0, y0);
            const float* p10 = image.pixel(x1, y0);
            const float* p01 = image.pixel(x0, y1);
            const float* p11 = image.pixel(x1, y1);
            float* o = out.image.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                const double top = p00[c] + (p10[c] - p00[c]) * wx;
                const double bot = p01[c] + (p11[c] - p01[c]) * wx;
                o[c] = float(top + (bot - top) * wy);
            }
        }
    }

    for (const auto& a : annotations) {
        Annotation s = a;
        s.box = scale_box(a.box, f);
        if (s.circle)
            s.circle = Circle{s.circle->cx * f, s.circle->cy * f, s.circle->r * f};
        // round(dim * f) may fall just short of dim * f on the long side.
        if (auto clipped = clip_box(s.box, dst)) {
            if (*clipped != s.box) {
                s.box = *clipped;
                s.shape = Shape::box;
                s.circle.reset();
            }
        }
        out.annotations.push_back(std::move(s));
    }
    return out;
}

Rgb pca_delta(const ColorStats& stats, const Rgb& alphas)
{
    Rgb delta{};
    for (int row = 0; row < 3; ++row)
        for (int k = 0; k < 3; ++k)
            delta[row] += stats.eigvecs[row][k] * alphas[k] * stats.eigvals[k];
    return delta;
}

Image apply_pca_jitter(const Image& image, const ColorStats& stats, const Rgb& alphas)
{
    const Rgb delta = pca_delta(stats, alphas);
    Image out = image;
    if (delta == Rgb{0.0, 0.0, 0.0})
        return out;
    auto& data = out.data();
    for (std::size_t i = 0; i < data.size(); i += 3)
        for (int c = 0; c < 3; ++c)
            data[i + c] = float(std::clamp(double(data[i + c]) + delta[c], 0.0, 1.0));
    return out;
}

Augmented apply_augmentation(const Image& image, std::span<const Annotation> annotations,
                             const AppliedAugmentation& applied, const ColorStats* stats)
{
    Augmented cur;
    if (applied.flipped) {
        cur = apply_flip(image, annotations);
    } else {
        cur.image = image;
        cur.annotations.assign(annotations.begin(), annotations.end());
    }
    Augmented scaled = rescale_shorter_side(cur.image, cur.annotations, applied.chosen_shorter_side);
    if (stats)
        scaled.image = apply_pca_jitter(scaled.image, *stats, applied.alphas);
    return scaled;
}

} // namespace orchard
