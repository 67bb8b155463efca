#include "orchard/dataset.hpp"

#include "orchard/error.hpp"
#include "orchard/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace orchard {

using nlohmann::json;

std::string_view to_string(Split s) noexcept
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "train";
}

Split parse_split(std::string_view s)
{
    if (s == "train")
        return Split::train;
    if (s == "val")
        return Split::val;
    if (s == "test")
        return Split::test;
    throw InvalidArgument("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

Annotation Annotation::from_box(const Box& b, std::string label)
{
    Annotation a;
    a.label = std::move(label);
    a.shape = Shape::box;
    a.box = b;
    return a;
}

Annotation Annotation::from_circle(const Circle& c, std::string label)
{
    Annotation a;
    a.label = std::move(label);
    a.shape = Shape::circle;
    a.circle = c;
    a.box = circle_to_box(c);
    return a;
}

std::vector<Box> ImageRecord::boxes() const
{
    std::vector<Box> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations)
        out.push_back(a.box);
    return out;
}

const ImageRecord* Manifest::find(std::string_view id) const
{
    auto it = std::find_if(images.begin(), images.end(),
                           [&](const ImageRecord& r) { return r.id == id; });
    return it == images.end() ? nullptr : &*it;
}

std::vector<ImageRecord> Manifest::split(Split s) const
{
    std::vector<ImageRecord> out;
    std::copy_if(images.begin(), images.end(), std::back_inserter(out),
                 [&](const ImageRecord& r) { return r.split == s; });
    return out;
}

double round4(double v) noexcept
{
    const double r = std::round(v * 1e4) / 1e4;
    return r == 0.0 ? 0.0 : r;
}

// ---------------------------------------------------------------------------
// Reading

namespace {

std::string line_context(std::string_view bytes, std::size_t byte_pos)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte_pos && i < bytes.size(); ++i) {
        if (bytes[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class Reader {
public:
    void expect_keys(const json& obj, const std::string& where,
                     std::initializer_list<std::string_view> allowed)
    {
        if (!obj.is_object())
            fail(where, "expected an object");
        for (const auto& [key, value] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                fail(where + "." + key, "unknown field");
        }
    }

    const json& field(const json& obj, const std::string& where, const char* key)
    {
        auto it = obj.find(key);
        if (it == obj.end())
            fail(where + "." + key, "missing required field");
        return *it;
    }

    std::string string_field(const json& obj, const std::string& where, const char* key)
    {
        const json& v = field(obj, where, key);
        if (!v.is_string())
            fail(where + "." + key, "expected a string");
        return v.get<std::string>();
    }

    int int_field(const json& obj, const std::string& where, const char* key)
    {
        const json& v = field(obj, where, key);
        if (!v.is_number_integer())
            fail(where + "." + key, "expected an integer");
        return v.get<int>();
    }

    std::vector<double> numbers(const json& v, const std::string& where, std::size_t n)
    {
        if (!v.is_array() || v.size() != n)
            fail(where, "expected an array of " + std::to_string(n) + " numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number())
                fail(where, "expected an array of " + std::to_string(n) + " numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    [[noreturn]] static void fail(const std::string& where, const std::string& what)
    {
        throw ParseError(where + ": " + what);
    }
};

Annotation read_annotation(Reader& rd, const json& j, const std::string& where)
{
    rd.expect_keys(j, where, {"label", "shape", "box", "circle", "source_index"});
    const std::string label = rd.string_field(j, where, "label");
    const std::string shape = rd.string_field(j, where, "shape");
    Annotation a;
    if (shape == "box") {
        if (j.contains("circle"))
            Reader::fail(where + ".circle", "not allowed on a box annotation");
        auto v = rd.numbers(rd.field(j, where, "box"), where + ".box", 4);
        a = Annotation::from_box({v[0], v[1], v[2], v[3]}, label);
    } else if (shape == "circle") {
        if (j.contains("box"))
            Reader::fail(where + ".box", "not allowed on a circle annotation");
        auto v = rd.numbers(rd.field(j, where, "circle"), where + ".circle", 3);
        a = Annotation::from_circle({v[0], v[1], v[2]}, label);
    } else {
        Reader::fail(where + ".shape", "expected \"box\" or \"circle\", got \"" + shape + "\"");
    }
    if (j.contains("source_index"))
        a.source_index = rd.int_field(j, where, "source_index");
    return a;
}

ImageRecord read_record(Reader& rd, const json& j, const std::string& where)
{
    rd.expect_keys(j, where,
                   {"id", "path", "width", "height", "split", "annotations", "source"});
    ImageRecord r;
    r.id = rd.string_field(j, where, "id");
    r.path = rd.string_field(j, where, "path");
    r.size = {rd.int_field(j, where, "width"), rd.int_field(j, where, "height")};
    const std::string split = rd.string_field(j, where, "split");
    try {
        r.split = parse_split(split);
    } catch (const InvalidArgument& e) {
        Reader::fail(where + ".split", e.what());
    }
    const json& anns = rd.field(j, where, "annotations");
    if (!anns.is_array())
        Reader::fail(where + ".annotations", "expected an array");
    for (std::size_t i = 0; i < anns.size(); ++i)
        r.annotations.push_back(
            read_annotation(rd, anns[i], where + ".annotations[" + std::to_string(i) + "]"));
    if (j.contains("source")) {
        const std::string sw = where + ".source";
        const json& s = j["source"];
        rd.expect_keys(s, sw, {"id", "offset"});
        auto off = rd.numbers(rd.field(s, sw, "offset"), sw + ".offset", 2);
        r.origin = PatchOrigin{rd.string_field(s, sw, "id"), off[0], off[1]};
    }
    return r;
}

// Clips annotation boxes to their image. Annotations left with zero area are
// reported rather than dropped.
void clip_annotations(Manifest& m, std::vector<std::string>& violations)
{
    for (auto& r : m.images) {
        if (r.size.width < 1 || r.size.height < 1)
            continue;
        for (std::size_t i = 0; i < r.annotations.size(); ++i) {
            auto& a = r.annotations[i];
            if (!a.box.valid())
                continue;
            auto clipped = clip_box(a.box, r.size);
            if (!clipped) {
                violations.push_back("image '" + r.id + "' annotation " + std::to_string(i) +
                                     " lies outside the " + std::to_string(r.size.width) + "x" +
                                     std::to_string(r.size.height) + " image");
                continue;
            }
            a.box = *clipped;
        }
    }
}

} // namespace

std::vector<std::string> validate_manifest(const Manifest& m)
{
    std::vector<std::string> violations;
    if (m.version != 1)
        violations.push_back("version must be 1, got " + std::to_string(m.version));
    if (!m.metadata.is_object())
        violations.push_back("metadata must be an object");

    std::set<std::string> seen;
    for (const auto& r : m.images) {
        if (r.id.empty())
            violations.push_back("image with empty id");
        else if (!seen.insert(r.id).second)
            violations.push_back("duplicate image id '" + r.id + "'");
        if (r.size.width < 1 || r.size.height < 1)
            violations.push_back("image '" + r.id + "' has non-positive size");
        const Box bounds{0.0, 0.0, double(r.size.width), double(r.size.height)};
        for (std::size_t i = 0; i < r.annotations.size(); ++i) {
            const auto& a = r.annotations[i];
            const std::string where = "image '" + r.id + "' annotation " + std::to_string(i);
            if (!a.box.valid())
                violations.push_back(where + " has min > max");
            if (a.shape == Shape::circle && (!a.circle || !(a.circle->r > 0.0)))
                violations.push_back(where + " circle radius must be positive");
            if (a.box.valid() && r.size.width >= 1 && !bounds.contains(a.box))
                violations.push_back(where + " lies outside the image");
        }
    }
    return violations;
}

Manifest load_manifest(std::string_view bytes)
{
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError("manifest: " + line_context(bytes, e.byte ? e.byte - 1 : 0) + ": " +
                         e.what());
    }

    Reader rd;
    rd.expect_keys(doc, "manifest", {"version", "fruit", "images", "metadata"});
    Manifest m;
    m.version = rd.int_field(doc, "manifest", "version");
    m.fruit = rd.string_field(doc, "manifest", "fruit");
    const json& images = rd.field(doc, "manifest", "images");
    if (!images.is_array())
        Reader::fail("manifest.images", "expected an array");
    for (std::size_t i = 0; i < images.size(); ++i)
        m.images.push_back(read_record(rd, images[i], "images[" + std::to_string(i) + "]"));
    if (doc.contains("metadata")) {
        if (!doc["metadata"].is_object())
            Reader::fail("manifest.metadata", "expected an object");
        m.metadata = doc["metadata"];
    }

    std::vector<std::string> violations;
    clip_annotations(m, violations);
    auto rest = validate_manifest(m);
    violations.insert(violations.end(), rest.begin(), rest.end());
    if (!violations.empty())
        throw ValidationError(std::move(violations));
    return m;
}

Manifest load_manifest_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFound("cannot open manifest " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_manifest(ss.str());
}

// ---------------------------------------------------------------------------
// Writing

std::string save_manifest(const Manifest& m)
{
    json doc = json::object();
    doc["version"] = m.version;
    doc["fruit"] = m.fruit;
    doc["metadata"] = m.metadata;
    json images = json::array();
    for (const auto& r : m.images) {
        json jr = json::object();
        jr["id"] = r.id;
        jr["path"] = r.path;
        jr["width"] = r.size.width;
        jr["height"] = r.size.height;
        jr["split"] = std::string(to_string(r.split));
        json anns = json::array();
        for (const auto& a : r.annotations) {
            json ja = json::object();
            ja["label"] = a.label;
            if (a.shape == Shape::circle && a.circle) {
                ja["shape"] = "circle";
                ja["circle"] = {round4(a.circle->cx), round4(a.circle->cy), round4(a.circle->r)};
            } else {
                ja["shape"] = "box";
                ja["box"] = {round4(a.box.x_min), round4(a.box.y_min), round4(a.box.x_max),
                             round4(a.box.y_max)};
            }
            if (a.source_index)
                ja["source_index"] = *a.source_index;
            anns.push_back(std::move(ja));
        }
        jr["annotations"] = std::move(anns);
        if (r.origin)
            jr["source"] = {{"id", r.origin->source_id},
                            {"offset", {round4(r.origin->x), round4(r.origin->y)}}};
        images.push_back(std::move(jr));
    }
    doc["images"] = std::move(images);
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<ImageRecord> sample_subimages(const ImageRecord& record, const PatchSpec& spec)
{
    const Size ps = spec.patch_size;
    if (ps.width < 1 || ps.height < 1)
        throw InvalidArgument("patch size must be at least 1x1");
    if (ps.width > record.size.width || ps.height > record.size.height)
        throw InvalidArgument("patch " + std::to_string(ps.width) + "x" +
                              std::to_string(ps.height) + " does not fit image '" + record.id +
                              "' (" + std::to_string(record.size.width) + "x" +
                              std::to_string(record.size.height) + ")");
    if (spec.count < 1)
        throw InvalidArgument("patch count must be >= 1");
    if (!(spec.min_visible_fraction >= 0.0 && spec.min_visible_fraction <= 1.0))
        throw InvalidArgument("min_visible_fraction must lie in [0, 1]");

    const std::uint64_t record_seed = derive_seed(spec.seed, record.id);
    std::vector<ImageRecord> patches;
    patches.reserve(std::size_t(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(record_seed, std::uint64_t(i)));
        const int x0 = int(rng.below(std::uint64_t(record.size.width - ps.width + 1)));
        const int y0 = int(rng.below(std::uint64_t(record.size.height - ps.height + 1)));
        const Box rect{double(x0), double(y0), double(x0 + ps.width), double(y0 + ps.height)};

        ImageRecord p;
        p.id = record.id + "_s" + std::to_string(spec.seed) + "_p" + std::to_string(i);
        p.path = record.path;
        p.size = ps;
        p.split = record.split;
        p.origin = PatchOrigin{record.origin ? record.origin->source_id : record.id,
                               x0 + (record.origin ? record.origin->x : 0.0),
                               y0 + (record.origin ? record.origin->y : 0.0)};

        for (std::size_t k = 0; k < record.annotations.size(); ++k) {
            const Annotation& src = record.annotations[k];
            const double area = src.box.area();
            auto clipped = clip_box(src.box, rect);
            if (!clipped || !(area > 0.0) ||
                clipped->area() / area < spec.min_visible_fraction)
                continue;
            Annotation a;
            a.label = src.label;
            a.source_index = int(k);
            if (src.shape == Shape::circle && src.circle && rect.contains(circle_to_box(*src.circle))) {
                a.shape = Shape::circle;
                a.circle = Circle{src.circle->cx - x0, src.circle->cy - y0, src.circle->r};
                a.box = circle_to_box(*a.circle);
            } else {
                // A cut circle is no longer a circle; keep its clipped box.
                a.shape = Shape::box;
                a.box = translate_box(*clipped, -x0, -y0);
            }
            p.annotations.push_back(std::move(a));
        }
        patches.push_back(std::move(p));
    }
    return patches;
}

std::vector<ImageRecord> discard_empty(std::vector<ImageRecord> records)
{
    std::erase_if(records, [](const ImageRecord& r) { return r.annotations.empty(); });
    return records;
}

std::vector<ImageRecord> draw_training_subset(const std::vector<ImageRecord>& records,
                                              std::size_t n, std::uint64_t seed)
{
    if (n < 1 || n > records.size())
        throw InvalidArgument("cannot draw " + std::to_string(n) + " records from a pool of " +
                              std::to_string(records.size()));
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(seed);
    // Partial Fisher-Yates: the first n slots are a uniform draw without replacement.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + std::size_t(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<ImageRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(records[order[i]]);
    return out;
}

} // namespace orchard
