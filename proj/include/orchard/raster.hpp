#pragma once

#include "orchard/geometry.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace orchard {

/// Interleaved RGB raster with intensities normalised to [0, 1].
class Image {
public:
    Image() = default;
    Image(int width, int height, std::array<float, 3> fill = {0.f, 0.f, 0.f});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Size size() const noexcept { return {width_, height_}; }
    bool empty() const noexcept { return data_.empty(); }

    float* pixel(int x, int y) noexcept { return &data_[offset(x, y)]; }
    const float* pixel(int x, int y) const noexcept { return &data_[offset(x, y)]; }

    std::vector<float>& data() noexcept { return data_; }
    const std::vector<float>& data() const noexcept { return data_; }

    /// Copy of the integer-aligned region [x, x + w) x [y, y + h).
    Image crop(int x, int y, int w, int h) const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t offset(int x, int y) const noexcept
    {
        return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Binary 8-bit PPM (P6). Throws ParseError on malformed files.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

} // namespace orchard
