#include "orchard/error.hpp"
#include "orchard/tiling.hpp"

#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace orchard;

namespace {

std::set<double> starts(const TilePlan& p, bool x)
{
    std::set<double> s;
    for (const auto& t : p.tiles)
        s.insert(x ? t.x_min : t.y_min);
    return s;
}

Manifest manifest_of(ImageRecord r)
{
    Manifest m;
    m.images.push_back(std::move(r));
    return m;
}

/// Always answers with one fixed local box, to check the local->global shift.
class FixedDetector final : public Detector {
public:
    std::vector<Detection> detect(const DetectRequest&) override
    {
        return {{{10, 10, 40, 40}, 0.5}};
    }
};

class FailingDetector final : public Detector {
public:
    std::vector<Detection> detect(const DetectRequest& r) override
    {
        if (r.rect.x_min >= 450)
            throw DetectorFailure("boom");
        return {};
    }
};

} // namespace

TEST(PlanTiles, SingleTileWhenImageMatchesTile)
{
    const TilePlan p = plan_tiles({500, 500}, TilingConfig{});
    ASSERT_EQ(p.tiles.size(), 1u);
    EXPECT_EQ(p.tiles[0], (Box{0, 0, 500, 500}));
}

TEST(PlanTiles, MangoImage)
{
    const TilePlan p = plan_tiles({3296, 2472}, TilingConfig{});
    EXPECT_EQ(p.tiles.size(), 48u);
    EXPECT_EQ(starts(p, true),
              (std::set<double>{0, 450, 900, 1350, 1800, 2250, 2700, 2796}));
    EXPECT_EQ(starts(p, false), (std::set<double>{0, 450, 900, 1350, 1800, 1972}));
    for (const auto& t : p.tiles) {
        EXPECT_EQ(t.width(), 500);
        EXPECT_EQ(t.height(), 500);
    }
    // row-major
    EXPECT_EQ(p.tiles[1], (Box{450, 0, 950, 500}));
    EXPECT_EQ(p.tiles.back(), (Box{2796, 1972, 3296, 2472}));
}

TEST(PlanTiles, SmallImageClampsToOneTile)
{
    const TilePlan p = plan_tiles({300, 300}, TilingConfig{});
    ASSERT_EQ(p.tiles.size(), 1u);
    EXPECT_EQ(p.tiles[0], (Box{0, 0, 300, 300}));
}

TEST(PlanTiles, CoversImageWithOverlap)
{
    for (int w : {501, 950, 951, 1234})
        for (int ov : {0, 50, 120}) {
            TilingConfig cfg;
            cfg.overlap = ov;
            const TilePlan p = plan_tiles({w, 700}, cfg);
            const auto xs = starts(p, true);
            double reach = 0;
            for (double x : xs) {
                EXPECT_LE(x, reach); // no gap
                reach = x + 500;
            }
            EXPECT_EQ(reach, w);
        }
}

TEST(PlanTiles, InvalidConfigRejected)
{
    TilingConfig cfg;
    cfg.overlap = 500;
    EXPECT_THROW(plan_tiles({1000, 1000}, cfg), InvalidArgument);
    cfg.overlap = -1;
    EXPECT_THROW(plan_tiles({1000, 1000}, cfg), InvalidArgument);
}

TEST(PlanTiles, Json)
{
    const auto j = plan_tiles({3296, 2472}, TilingConfig{}).to_json();
    EXPECT_EQ(j["tile_count"], 48);
    EXPECT_EQ(j["tiles"].size(), 48u);
}

TEST(RunTiled, TranslatesToGlobalCoordinates)
{
    ImageRecord r{"img", "", {950, 500}};
    const TilePlan p = plan_tiles(r.size, TilingConfig{});
    ASSERT_EQ(p.tiles.size(), 2u);
    FixedDetector det;
    const auto pooled = run_tiled(r, p, det);
    ASSERT_EQ(pooled.size(), 2u);
    EXPECT_EQ(pooled[0].box, (Box{10, 10, 40, 40}));
    EXPECT_EQ(pooled[1].box, (Box{460, 10, 490, 40}));
}

TEST(RunTiled, NoiselessSceneYieldsAtLeastEveryFruit)
{
    SceneSpec spec;
    spec.seed = 8;
    const ImageRecord r = synthesize_scene(spec);
    const Manifest m = manifest_of(r);
    auto det = make_detector(OracleNoise{}, &m);
    const auto pooled = run_tiled(r, plan_tiles(r.size, TilingConfig{}), *det);
    EXPECT_GE(pooled.size(), 56u);
    for (const auto& a : r.annotations)
        EXPECT_TRUE(std::any_of(pooled.begin(), pooled.end(),
                                [&](const Detection& d) { return d.box == a.box; }));
}

TEST(RunTiled, EmptySceneEmptyPool)
{
    const ImageRecord r{"empty", "", {3296, 2472}};
    const Manifest m = manifest_of(r);
    auto det = make_detector(OracleNoise{}, &m);
    EXPECT_TRUE(run_tiled(r, plan_tiles(r.size, TilingConfig{}), *det).empty());
}

TEST(RunTiled, ParallelMatchesSerial)
{
    SceneSpec spec;
    spec.seed = 21;
    const ImageRecord r = synthesize_scene(spec);
    const Manifest m = manifest_of(r);
    OracleNoise noise;
    noise.jitter_sigma = 2;
    noise.spurious_rate = 1;
    noise.drop_rate = 0.1;
    auto det = make_detector(noise, &m);
    const TilePlan p = plan_tiles(r.size, TilingConfig{});
    const auto serial = run_tiled(r, p, *det, 1);
    EXPECT_EQ(run_tiled(r, p, *det, 8), serial);
}

TEST(RunTiled, FailureNamesTile)
{
    const ImageRecord r{"img", "", {1400, 500}};
    FailingDetector det;
    try {
        run_tiled(r, plan_tiles(r.size, TilingConfig{}), det, 4);
        FAIL();
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("450"), std::string::npos) << e.what();
    }
}

TEST(Fuse, DuplicatesFromAdjacentTilesCollapse)
{
    const std::vector<Detection> pooled{{{460, 10, 490, 40}, 0.9}, {{460, 10, 490, 40.5}, 0.9}};
    EXPECT_EQ(fuse(pooled, TilingConfig{}).size(), 1u);
}

TEST(Fuse, ThresholdOneDropsEverything)
{
    TilingConfig cfg;
    cfg.proposal.score_threshold = 1.0;
    const std::vector<Detection> pooled{{{0, 0, 1, 1}, 0.99}, {{5, 5, 6, 6}, 0.5}};
    EXPECT_TRUE(fuse(pooled, cfg).empty());
}

TEST(Fuse, MangoTreeDropsTwo)
{
    SceneSpec spec;
    spec.id = "tree";
    spec.seed = 2016;
    const ImageRecord r = synthesize_scene(spec);
    const Manifest m = manifest_of(r);
    OracleNoise noise;
    noise.drop_rate = 2.0 / 56.0;
    noise.seed = fixtures::seed_with_drops(r, noise, 2);
    auto det = make_detector(noise, &m);
    const TilingConfig cfg;
    const auto fused = fuse(run_tiled(r, plan_tiles(r.size, cfg), *det), cfg);
    ASSERT_EQ(fused.size(), 54u);
    std::size_t on_gt = 0;
    for (const auto& d : fused)
        on_gt += std::any_of(r.annotations.begin(), r.annotations.end(),
                             [&](const Annotation& a) { return a.box == d.box; });
    EXPECT_EQ(on_gt, 54u);
}
