#include "orchard/geometry.hpp"

#include "orchard/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <string>
#include <tuple>

namespace orchard {

bool canonical_less(const Box& a, const Box& b) noexcept
{
    return std::tie(a.x_min, a.y_min, a.x_max, a.y_max) <
           std::tie(b.x_min, b.y_min, b.x_max, b.y_max);
}

Size parse_size(const char* text)
{
    const char* end = text + std::strlen(text);
    const char* sep = std::find_if(text, end, [](char c) { return c == 'x' || c == 'X'; });
    Size s{0, 0};
    auto [p1, e1] = std::from_chars(text, sep, s.width);
    if (sep == end || e1 != std::errc{} || p1 != sep)
        throw InvalidArgument(std::string("expected WxH, got '") + text + "'");
    auto [p2, e2] = std::from_chars(sep + 1, end, s.height);
    if (e2 != std::errc{} || p2 != end)
        throw InvalidArgument(std::string("expected WxH, got '") + text + "'");
    if (s.width < 1 || s.height < 1)
        throw InvalidArgument(std::string("size must be at least 1x1, got '") + text + "'");
    return s;
}

double intersection_area(const Box& a, const Box& b) noexcept
{
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0)
        return 0.0;
    return w * h;
}

double iou(const Box& a, const Box& b) noexcept
{
    const double inter = intersection_area(a, b);
    if (inter <= 0.0)
        return 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0)
        return 0.0;
    return std::min(1.0, inter / uni);
}

Box circle_to_box(const Circle& c) noexcept
{
    return {c.cx - c.r, c.cy - c.r, c.cx + c.r, c.cy + c.r};
}

std::optional<Box> clip_box(const Box& b, const Box& region) noexcept
{
    Box out{std::max(b.x_min, region.x_min), std::max(b.y_min, region.y_min),
            std::min(b.x_max, region.x_max), std::min(b.y_max, region.y_max)};
    if (out.x_max <= out.x_min || out.y_max <= out.y_min)
        return std::nullopt;
    return out;
}

std::optional<Box> clip_box(const Box& b, Size bounds) noexcept
{
    return clip_box(b, Box{0.0, 0.0, double(bounds.width), double(bounds.height)});
}

Box translate_box(const Box& b, double dx, double dy) noexcept
{
    return {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
}

Box scale_box(const Box& b, double factor)
{
    if (!(factor > 0.0))
        throw InvalidArgument("scale factor must be positive, got " + std::to_string(factor));
    return {b.x_min * factor, b.y_min * factor, b.x_max * factor, b.y_max * factor};
}

} // namespace orchard
