#include "orchard/tiling.hpp"

#include "orchard/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

namespace orchard {

void TilingConfig::validate() const
{
    if (tile_size.width < 1 || tile_size.height < 1)
        throw InvalidArgument("tile size must be at least 1x1");
    if (overlap < 0 || overlap >= std::min(tile_size.width, tile_size.height))
        throw InvalidArgument("overlap must lie in [0, min(tile width, tile height))");
    if (parallelism < 1)
        throw InvalidArgument("parallelism must be >= 1");
    proposal.validate();
}

nlohmann::json TilePlan::to_json() const
{
    nlohmann::json tiles_json = nlohmann::json::array();
    for (const Box& t : tiles)
        tiles_json.push_back({t.x_min, t.y_min, t.x_max, t.y_max});
    return {{"image_size", {image_size.width, image_size.height}},
            {"tile_count", tiles.size()},
            {"tiles", tiles_json}};
}

namespace {

std::vector<int> axis_origins(int extent, int tile, int overlap)
{
    if (extent <= tile)
        return {0};
    const int stride = tile - overlap;
    std::vector<int> starts;
    int s = 0;
    for (; s + tile < extent; s += stride)
        starts.push_back(s);
    starts.push_back(extent - tile);
    return starts;
}

} // namespace

TilePlan plan_tiles(Size image, const TilingConfig& cfg)
{
    cfg.validate();
    if (image.width < 1 || image.height < 1)
        throw InvalidArgument("image must be at least 1x1");
    const auto xs = axis_origins(image.width, cfg.tile_size.width, cfg.overlap);
    const auto ys = axis_origins(image.height, cfg.tile_size.height, cfg.overlap);
    const int tw = std::min(cfg.tile_size.width, image.width);
    const int th = std::min(cfg.tile_size.height, image.height);

    TilePlan plan;
    plan.image_size = image;
    plan.tiles.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs)
            plan.tiles.push_back({double(x), double(y), double(x + tw), double(y + th)});
    return plan;
}

std::vector<Detection> run_tiled(const ImageRecord& record, const TilePlan& plan,
                                 Detector& detector, int parallelism)
{
    if (plan.image_size != record.size)
        throw InvalidArgument("tile plan is for a different image size than '" + record.id + "'");
    if (parallelism < 1)
        throw InvalidArgument("parallelism must be >= 1");

    std::vector<std::vector<Detection>> per_tile(plan.tiles.size());
    std::vector<std::exception_ptr> errors(plan.tiles.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < plan.tiles.size(); i = next++) {
            const Box& tile = plan.tiles[i];
            try {
                DetectRequest req{record.id, record.path, tile, nullptr};
                auto dets = detector.detect(req);
                for (auto& d : dets)
                    d.box = translate_box(d.box, tile.x_min, tile.y_min);
                per_tile[i] = std::move(dets);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const int n_threads = std::min<int>(parallelism, int(plan.tiles.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (int t = 0; t < n_threads; ++t)
            threads.emplace_back(worker);
    }

    // Report the first failing tile in plan order, whatever the schedule.
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i])
            continue;
        const Box& t = plan.tiles[i];
        std::ostringstream where;
        where << "tile [" << t.x_min << ',' << t.y_min << ',' << t.x_max << ',' << t.y_max
              << "] of '" << record.id << "': ";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const ProtocolError& e) {
            throw ProtocolError(where.str() + "detector protocol violation", e.line());
        } catch (const NotFound& e) {
            throw NotFound(where.str() + e.what());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(where.str() + e.what());
        } catch (const DetectorFailure& e) {
            throw DetectorFailure(where.str() + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error(where.str() + e.what());
        }
    }

    std::vector<Detection> pooled;
    for (auto& dets : per_tile)
        pooled.insert(pooled.end(), std::make_move_iterator(dets.begin()),
                      std::make_move_iterator(dets.end()));
    sort_canonical(pooled);
    return pooled;
}

std::vector<Detection> fuse(std::span<const Detection> pooled, const TilingConfig& cfg)
{
    cfg.proposal.validate();
    std::vector<Detection> kept;
    kept.reserve(pooled.size());
    for (const auto& d : pooled)
        if (d.score >= cfg.proposal.score_threshold)
            kept.push_back(d);
    return nms(kept, cfg.proposal.nms_iou);
}

} // namespace orchard
