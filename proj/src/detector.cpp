#include "orchard/detector.hpp"

#include "orchard/error.hpp"
#include "orchard/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace orchard {

using nlohmann::json;

std::unique_ptr<Detector> make_external_detector(const ExternalCommand& cmd);

namespace {

void check_range(const ScoreRange& r, const char* name)
{
    if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0))
        throw InvalidArgument(std::string(name) + " must be a sub-interval of [0, 1]");
}

std::string rect_text(const Box& r)
{
    std::ostringstream ss;
    ss << round4(r.x_min) << ',' << round4(r.y_min) << ',' << round4(r.width()) << ','
       << round4(r.height());
    return ss.str();
}

} // namespace

void OracleNoise::validate() const
{
    if (!(drop_rate >= 0.0 && drop_rate <= 1.0))
        throw InvalidArgument("drop_rate must lie in [0, 1]");
    if (!(spurious_rate >= 0.0))
        throw InvalidArgument("spurious_rate must be non-negative");
    if (!(jitter_sigma >= 0.0))
        throw InvalidArgument("jitter_sigma must be non-negative");
    if (!(min_visible_fraction > 0.0 && min_visible_fraction <= 1.0))
        throw InvalidArgument("min_visible_fraction must lie in (0, 1]");
    check_range(tp_score_range, "tp_score_range");
    check_range(fp_score_range, "fp_score_range");
}

std::string_view detector_kind(const DetectorSpec& spec) noexcept
{
    switch (spec.index()) {
    case 0:
        return "oracle";
    case 1:
        return "file";
    default:
        return "external";
    }
}

// ---------------------------------------------------------------------------
// Oracle

bool oracle_keeps(const OracleNoise& noise, std::string_view image_id, std::size_t index)
{
    Rng rng(derive_seed(derive_seed(noise.seed, image_id), std::uint64_t(index)));
    return !rng.bernoulli(noise.drop_rate);
}

std::vector<Detection> oracle_detect(std::span<const Box> gt, const OracleNoise& noise,
                                     const Box& region, std::string_view image_id)
{
    noise.validate();
    const std::uint64_t image_seed = derive_seed(noise.seed, image_id);
    std::vector<Detection> out;

    for (std::size_t k = 0; k < gt.size(); ++k) {
        const Box& g = gt[k];
        const double area = g.area();
        auto visible = clip_box(g, region);
        if (!visible || !(area > 0.0) || visible->area() / area < noise.min_visible_fraction)
            continue;

        // Fixed draw order per fruit, whatever the noise settings.
        Rng rng(derive_seed(image_seed, std::uint64_t(k)));
        const bool dropped = rng.bernoulli(noise.drop_rate);
        const double score = rng.uniform(noise.tp_score_range.lo, noise.tp_score_range.hi);
        const double ex = rng.normal(), ey = rng.normal();
        const double ew = rng.normal(), eh = rng.normal();
        if (dropped)
            continue;

        Box b = g;
        if (noise.jitter_sigma > 0.0) {
            const double s = noise.jitter_sigma;
            const double cx = g.center_x() + s * ex;
            const double cy = g.center_y() + s * ey;
            const double w = g.width() * std::exp(s * ew / g.width());
            const double h = g.height() * std::exp(s * eh / g.height());
            b = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
        }
        if (auto clipped = clip_box(b, region))
            out.push_back({*clipped, score, "fruit"});
    }

    if (noise.spurious_rate > 0.0) {
        Rng rng(derive_seed(image_seed, "spurious@" + rect_text(region)));
        const std::uint64_t count = rng.poisson(noise.spurious_rate);
        for (std::uint64_t i = 0; i < count; ++i) {
            double w = 34.0, h = 34.0;
            if (!gt.empty()) {
                const Box& like = gt[rng.below(gt.size())];
                w = like.width();
                h = like.height();
            }
            const double cx = rng.uniform(region.x_min, region.x_max);
            const double cy = rng.uniform(region.y_min, region.y_max);
            const double score = rng.uniform(noise.fp_score_range.lo, noise.fp_score_range.hi);
            const Box b{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
            if (auto clipped = clip_box(b, region))
                out.push_back({*clipped, score, "fruit"});
        }
    }

    sort_canonical(out);
    return out;
}

namespace {

std::vector<Detection> to_local(std::vector<Detection> dets, const Box& rect)
{
    for (auto& d : dets)
        d.box = translate_box(d.box, -rect.x_min, -rect.y_min);
    return dets;
}

class OracleDetector final : public Detector {
public:
    OracleDetector(OracleNoise noise, const Manifest* gt) : noise_(noise), gt_(gt)
    {
        noise_.validate();
        if (!gt_)
            throw InvalidArgument("oracle detector needs a ground-truth manifest");
    }

    std::vector<Detection> detect(const DetectRequest& req) override
    {
        const ImageRecord* rec = gt_->find(req.image_id);
        if (!rec)
            throw NotFound("oracle: no ground truth for image '" + req.image_id + "'");
        const auto boxes = rec->boxes();
        return to_local(oracle_detect(boxes, noise_, req.rect, req.image_id), req.rect);
    }

private:
    OracleNoise noise_;
    const Manifest* gt_;
};

class FileDetector final : public Detector {
public:
    explicit FileDetector(const std::string& path) : dets_(load_detections_file(path)) {}

    std::vector<Detection> detect(const DetectRequest& req) override
    {
        if (auto it = dets_.find(tile_key(req.image_id, req.rect)); it != dets_.end()) {
            const Box local{0.0, 0.0, req.rect.width(), req.rect.height()};
            std::vector<Detection> out;
            for (const auto& d : it->second)
                if (auto c = clip_box(d.box, local))
                    out.push_back({*c, d.score, d.label});
            sort_canonical(out);
            return out;
        }
        if (auto it = dets_.find(req.image_id); it != dets_.end()) {
            std::vector<Detection> out;
            for (const auto& d : it->second)
                if (auto c = clip_box(d.box, req.rect))
                    out.push_back({*c, d.score, d.label});
            sort_canonical(out);
            return to_local(std::move(out), req.rect);
        }
        throw NotFound("no stored detections for image '" + req.image_id + "' rect [" +
                       rect_text(req.rect) + "]");
    }

private:
    DetectionMap dets_;
};

} // namespace

std::unique_ptr<Detector> make_detector(const DetectorSpec& spec, const Manifest* ground_truth)
{
    if (auto* o = std::get_if<OracleNoise>(&spec))
        return std::make_unique<OracleDetector>(*o, ground_truth);
    if (auto* f = std::get_if<FileSource>(&spec))
        return std::make_unique<FileDetector>(f->path);
    return make_external_detector(std::get<ExternalCommand>(spec));
}

// ---------------------------------------------------------------------------
// Detections manifest

std::string tile_key(std::string_view image_id, const Box& rect)
{
    return std::string(image_id) + "@" + rect_text(rect);
}

namespace {

Detection read_detection(const json& j, const std::string& where)
{
    if (!j.is_object())
        throw ParseError(where + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (key != "box" && key != "score" && key != "label")
            throw ParseError(where + "." + key + ": unknown field");
    Detection d;
    const json* box = j.contains("box") ? &j["box"] : nullptr;
    if (!box || !box->is_array() || box->size() != 4 ||
        !std::all_of(box->begin(), box->end(), [](const json& v) { return v.is_number(); }))
        throw ParseError(where + ".box: expected an array of 4 numbers");
    d.box = {(*box)[0].get<double>(), (*box)[1].get<double>(), (*box)[2].get<double>(),
             (*box)[3].get<double>()};
    if (!d.box.valid())
        throw ParseError(where + ".box: min exceeds max");
    if (!j.contains("score") || !j["score"].is_number())
        throw ParseError(where + ".score: expected a number");
    d.score = j["score"].get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0))
        throw ParseError(where + ".score: must lie in [0, 1]");
    if (j.contains("label")) {
        if (!j["label"].is_string())
            throw ParseError(where + ".label: expected a string");
        d.label = j["label"].get<std::string>();
    }
    return d;
}

} // namespace

DetectionMap load_detections(std::string_view bytes)
{
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("detections: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("detections: expected an object");
    for (const auto& [key, value] : doc.items())
        if (key != "version" && key != "detections")
            throw ParseError("detections." + key + ": unknown field");
    if (!doc.contains("version") || doc["version"] != 1)
        throw ParseError("detections.version: must be 1");
    if (!doc.contains("detections") || !doc["detections"].is_object())
        throw ParseError("detections.detections: expected an object");

    DetectionMap out;
    for (const auto& [id, list] : doc["detections"].items()) {
        const std::string where = "detections[\"" + id + "\"]";
        if (!list.is_array())
            throw ParseError(where + ": expected an array");
        auto& dets = out[id];
        for (std::size_t i = 0; i < list.size(); ++i)
            dets.push_back(read_detection(list[i], where + "[" + std::to_string(i) + "]"));
        sort_canonical(dets);
    }
    return out;
}

DetectionMap load_detections_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFound("cannot open detections file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_detections(ss.str());
}

std::string save_detections(const DetectionMap& dets)
{
    json body = json::object();
    for (const auto& [id, list] : dets) {
        std::vector<Detection> sorted = list;
        for (auto& d : sorted) {
            d.box = {round4(d.box.x_min), round4(d.box.y_min), round4(d.box.x_max),
                     round4(d.box.y_max)};
            d.score = round4(d.score);
        }
        sort_canonical(sorted);
        json arr = json::array();
        for (const auto& d : sorted)
            arr.push_back({{"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
                           {"score", d.score},
                           {"label", d.label}});
        body[id] = std::move(arr);
    }
    json doc = {{"version", 1}, {"detections", std::move(body)}};
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

bool intersects_any(const Box& b, const std::vector<Box>& boxes, std::size_t skip = SIZE_MAX)
{
    for (std::size_t i = 0; i < boxes.size(); ++i)
        if (i != skip && intersection_area(b, boxes[i]) > 0.0)
            return true;
    return false;
}

Box rounded(const Box& b)
{
    return {round4(b.x_min), round4(b.y_min), round4(b.x_max), round4(b.y_max)};
}

} // namespace

ImageRecord synthesize_scene(const SceneSpec& spec)
{
    if (spec.fruit < 0 || spec.clustered < 0 || spec.clustered > spec.fruit / 2)
        throw InvalidArgument("clustered fruit must be at most half of all fruit");
    if (!(spec.min_side > 0.0 && spec.min_side <= spec.max_side))
        throw InvalidArgument("fruit sides must satisfy 0 < min_side <= max_side");
    if (spec.max_side > std::min(spec.image.width, spec.image.height))
        throw InvalidArgument("fruit larger than the image");

    Rng rng(derive_seed(spec.seed, spec.id));
    const int independent = spec.fruit - spec.clustered;
    std::vector<Box> boxes;
    boxes.reserve(std::size_t(spec.fruit));
    constexpr int kAttempts = 20000;

    for (int i = 0; i < independent; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const double side = rng.uniform(spec.min_side, spec.max_side);
            const double x = rng.uniform(0.0, spec.image.width - side);
            const double y = rng.uniform(0.0, spec.image.height - side);
            const Box b = rounded({x, y, x + side, y + side});
            if (!intersects_any(b, boxes)) {
                boxes.push_back(b);
                placed = true;
            }
        }
        if (!placed)
            throw InvalidArgument("could not place " + std::to_string(spec.fruit) +
                                  " fruit without overlap");
    }

    for (int i = 0; i < spec.clustered; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const std::size_t anchor = rng.below(std::size_t(independent));
            const Box& a = boxes[anchor];
            // Equal squares shifted by d along one axis: IoU = (s - d) / (s + d).
            const double t = rng.uniform(0.25, 0.5);
            const double d = a.width() * (1.0 - t) / (1.0 + t);
            const int dir = int(rng.below(4));
            const double dx = dir == 0 ? d : dir == 1 ? -d : 0.0;
            const double dy = dir == 2 ? d : dir == 3 ? -d : 0.0;
            const Box b = rounded(translate_box(a, dx, dy));
            if (b.x_min < 0 || b.y_min < 0 || b.x_max > spec.image.width ||
                b.y_max > spec.image.height)
                continue;
            if (intersects_any(b, boxes, anchor))
                continue;
            boxes.push_back(b);
            placed = true;
        }
        if (!placed)
            throw InvalidArgument("could not place clustered fruit");
    }

    ImageRecord rec;
    rec.id = spec.id;
    rec.path = spec.path;
    rec.size = spec.image;
    rec.split = spec.split;
    for (const Box& b : boxes)
        rec.annotations.push_back(Annotation::from_box(b));
    return rec;
}

} // namespace orchard
