#include "orchard/raster.hpp"

#include "orchard/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace orchard {

Image::Image(int width, int height, std::array<float, 3> fill)
    : width_(width), height_(height)
{
    if (width < 1 || height < 1)
        throw InvalidArgument("image dimensions must be positive");
    data_.resize(std::size_t(width) * std::size_t(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3)
        std::copy(fill.begin(), fill.end(), data_.begin() + std::ptrdiff_t(i));
}

Image Image::crop(int x, int y, int w, int h) const
{
    if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_)
        throw InvalidArgument("crop region outside image");
    Image out(w, h);
    for (int row = 0; row < h; ++row) {
        const float* src = pixel(x, y + row);
        std::copy(src, src + std::size_t(w) * 3, out.pixel(0, row));
    }
    return out;
}

namespace {

void skip_space_and_comments(std::istream& in)
{
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

int read_header_int(std::istream& in, const std::filesystem::path& path)
{
    skip_space_and_comments(in);
    int value = 0;
    if (!(in >> value))
        throw ParseError(path.string() + ": truncated PPM header");
    return value;
}

} // namespace

Image read_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFound("cannot open image " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P6")
        throw ParseError(path.string() + ": not a binary PPM (P6) file");
    const int w = read_header_int(in, path);
    const int h = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (w < 1 || h < 1 || maxval != 255)
        throw ParseError(path.string() + ": only 8-bit PPM with positive dimensions is supported");
    in.get();

    std::vector<unsigned char> bytes(std::size_t(w) * std::size_t(h) * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (in.gcount() != std::streamsize(bytes.size()))
        throw ParseError(path.string() + ": truncated pixel data");

    Image img(w, h);
    std::transform(bytes.begin(), bytes.end(), img.data().begin(),
                   [](unsigned char b) { return float(b) / 255.f; });
    return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InvalidArgument("cannot write image " + path.string());
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    std::vector<unsigned char> bytes(image.data().size());
    std::transform(image.data().begin(), image.data().end(), bytes.begin(), [](float v) {
        return static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
    });
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

} // namespace orchard
