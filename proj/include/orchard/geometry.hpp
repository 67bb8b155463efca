#pragma once

#include <optional>

namespace orchard {

/// Axis-aligned rectangle in continuous pixel coordinates (x right, y down).
/// Degenerate (zero-area) boxes are legal.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return 0.5 * (x_min + x_max); }
    double center_y() const noexcept { return 0.5 * (y_min + y_max); }
    bool valid() const noexcept { return x_min <= x_max && y_min <= y_max; }

    /// True when `other` lies inside this box, borders inclusive.
    bool contains(const Box& other) const noexcept
    {
        return other.x_min >= x_min && other.y_min >= y_min && other.x_max <= x_max &&
               other.y_max <= y_max;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Lexicographic (x_min, y_min, x_max, y_max) order used for deterministic tie-breaks.
bool canonical_less(const Box& a, const Box& b) noexcept;

struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 1.0;

    friend bool operator==(const Circle&, const Circle&) = default;
};

struct Size {
    int width = 1;
    int height = 1;

    friend bool operator==(const Size&, const Size&) = default;
};

/// Parses "WxH" (e.g. "3296x2472"). Throws InvalidArgument on anything else.
Size parse_size(const char* text);

double intersection_area(const Box& a, const Box& b) noexcept;

/// Intersection over union. Zero for disjoint pairs and whenever the union is empty.
double iou(const Box& a, const Box& b) noexcept;

Box circle_to_box(const Circle& c) noexcept;

/// Intersection with (0, 0, width, height); nullopt when that has zero area.
std::optional<Box> clip_box(const Box& b, Size bounds) noexcept;

/// Intersection with an arbitrary region; nullopt when that has zero area.
std::optional<Box> clip_box(const Box& b, const Box& region) noexcept;

Box translate_box(const Box& b, double dx, double dy) noexcept;

/// Throws InvalidArgument when factor <= 0.
Box scale_box(const Box& b, double factor);

} // namespace orchard
