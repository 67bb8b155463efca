#pragma once

#include "orchard/geometry.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orchard {

enum class Split { train, val, test };

std::string_view to_string(Split s) noexcept;
/// Throws InvalidArgument for anything other than "train", "val" or "test".
Split parse_split(std::string_view s);

enum class Shape { box, circle };

struct Annotation {
    std::string label = "fruit";
    Shape shape = Shape::box;
    /// Always populated. For circles: circle_to_box(*circle) clipped to the image.
    Box box;
    std::optional<Circle> circle;
    /// Index of the annotation in the source record this one was cut from.
    std::optional<int> source_index;

    static Annotation from_box(const Box& b, std::string label = "fruit");
    static Annotation from_circle(const Circle& c, std::string label = "fruit");

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Where a patch record sits inside its raw source image.
struct PatchOrigin {
    std::string source_id;
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct ImageRecord {
    std::string id;
    std::string path;
    Size size;
    Split split = Split::train;
    std::vector<Annotation> annotations;
    std::optional<PatchOrigin> origin;

    std::vector<Box> boxes() const;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Manifest {
    int version = 1;
    std::string fruit;
    std::vector<ImageRecord> images;
    nlohmann::json metadata = nlohmann::json::object();

    const ImageRecord* find(std::string_view id) const;
    std::vector<ImageRecord> split(Split s) const;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Parses and validates a manifest document. Annotation boxes are clipped to
/// their image. Throws ParseError (syntax, unknown or mistyped fields) or
/// ValidationError (every invariant violation found).
Manifest load_manifest(std::string_view bytes);
Manifest load_manifest_file(const std::string& path);

/// Canonical serialisation: sorted keys, two-space indent, numbers rounded to
/// four fractional digits, trailing newline.
std::string save_manifest(const Manifest& m);

/// Collects every invariant violation in `m`; empty when valid.
std::vector<std::string> validate_manifest(const Manifest& m);

/// Rounds to the four fractional digits kept by the canonical documents.
double round4(double v) noexcept;

struct PatchSpec {
    Size patch_size{500, 500};
    int count = 1;
    double min_visible_fraction = 0.25;
    std::uint64_t seed = 0;
};

/// Random fully-contained patches of `record`. A clipped annotation is kept
/// when its visible area is at least min_visible_fraction of the original.
/// Throws InvalidArgument when the patch does not fit the source.
std::vector<ImageRecord> sample_subimages(const ImageRecord& record, const PatchSpec& spec);

/// Records with at least one annotation, order preserved.
std::vector<ImageRecord> discard_empty(std::vector<ImageRecord> records);

/// `n` distinct records drawn uniformly without replacement.
std::vector<ImageRecord> draw_training_subset(const std::vector<ImageRecord>& records,
                                              std::size_t n, std::uint64_t seed);

} // namespace orchard
