#include "orchard/detector.hpp"
#include "orchard/error.hpp"
#include "orchard/tiling.hpp"

#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>

using namespace orchard;

namespace {

Manifest manifest_of(ImageRecord r)
{
    Manifest m;
    m.fruit = "mango";
    m.images.push_back(std::move(r));
    return m;
}

DetectRequest whole(const ImageRecord& r)
{
    return {r.id, r.path, {0, 0, double(r.size.width), double(r.size.height)}, nullptr};
}

std::filesystem::path temp_file(const std::string& name, const std::string& body)
{
    const auto dir = std::filesystem::temp_directory_path() / "orchard_detector_test";
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::ofstream(p) << body;
    return p;
}

ExternalCommand fake(const std::string& mode)
{
    ExternalCommand c;
    c.argv = {FAKE_DETECTOR, mode};
    c.handshake_timeout_ms = 2000;
    c.request_timeout_ms = 2000;
    return c;
}

} // namespace

TEST(Oracle, NoiselessReturnsEveryFruitInRegion)
{
    ImageRecord r;
    r.id = "five";
    r.size = {400, 300};
    for (int k = 0; k < 5; ++k)
        r.annotations.push_back(Annotation::from_box({10.0 + 60 * k, 20, 40.0 + 60 * k, 50}));
    r.annotations.push_back(Annotation::from_box({350, 250, 390, 290})); // outside the region
    const Manifest m = manifest_of(r);
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        OracleNoise noise;
        noise.seed = seed;
        auto det = make_detector(noise, &m);
        const auto out = det->detect({"five", "", {0, 0, 320, 200}, nullptr});
        ASSERT_EQ(out.size(), 5u);
        for (const auto& d : out) {
            EXPECT_GE(d.score, 0.7);
            EXPECT_LE(d.score, 1.0);
            const bool on_gt = std::any_of(r.annotations.begin(), r.annotations.end(),
                                           [&](const Annotation& a) { return a.box == d.box; });
            EXPECT_TRUE(on_gt);
        }
    }
}

TEST(Oracle, SeededToDropTwoOfFiftySix)
{
    SceneSpec spec;
    spec.id = "tree";
    spec.seed = 2016;
    const ImageRecord tree = synthesize_scene(spec);
    ASSERT_EQ(tree.annotations.size(), 56u);
    OracleNoise noise;
    noise.drop_rate = 2.0 / 56.0;
    noise.seed = fixtures::seed_with_drops(tree, noise, 2);
    const Manifest m = manifest_of(tree);
    EXPECT_EQ(make_detector(noise, &m)->detect(whole(tree)).size(), 54u);
}

TEST(Oracle, DropEverythingLeavesOnlySpurious)
{
    SceneSpec spec;
    spec.image = {1000, 800};
    spec.fruit = 20;
    const ImageRecord r = synthesize_scene(spec);
    OracleNoise noise;
    noise.drop_rate = 1.0;
    noise.spurious_rate = 5.0;
    noise.seed = 3;
    const auto out = oracle_detect(r.boxes(), noise, {0, 0, 1000, 800}, r.id);
    EXPECT_FALSE(out.empty());
    for (const auto& d : out)
        EXPECT_LE(d.score, 0.6);
}

TEST(Oracle, JitterKeepsThirtySevenPixelFruitMatchable)
{
    const std::vector<Box> gt{{100, 100, 137, 137}};
    OracleNoise noise;
    noise.jitter_sigma = 3.0;
    double worst = 1.0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        noise.seed = s;
        const auto out = oracle_detect(gt, noise, {0, 0, 300, 300}, "apple");
        ASSERT_EQ(out.size(), 1u);
        worst = std::min(worst, fixtures::brute_iou(out[0].box, gt[0]));
    }
    EXPECT_GE(worst, 0.2);
}

TEST(Oracle, SpuriousCountIsPoissonOverTiles)
{
    const TilePlan plan = plan_tiles({3296, 2472}, TilingConfig{});
    ASSERT_EQ(plan.tiles.size(), 48u);
    OracleNoise noise;
    noise.drop_rate = 1.0;
    noise.spurious_rate = 2.0;
    noise.seed = 5;
    std::size_t total = 0;
    for (const auto& t : plan.tiles)
        total += oracle_detect({}, noise, t, "mango").size();
    EXPECT_LE(std::abs(double(total) - 96.0), 3.0 * std::sqrt(96.0)) << total;
}

TEST(Oracle, SameFruitLooksTheSameFromEveryRegion)
{
    const std::vector<Box> gt{{460, 10, 490, 40}};
    OracleNoise noise;
    noise.jitter_sigma = 2.0;
    noise.seed = 9;
    const auto a = oracle_detect(gt, noise, {0, 0, 500, 500}, "img");
    const auto b = oracle_detect(gt, noise, {450, 0, 950, 500}, "img");
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a, b);
}

TEST(Oracle, RequiresGroundTruth)
{
    EXPECT_THROW(make_detector(OracleNoise{}, nullptr), InvalidArgument);
    const Manifest m = manifest_of(ImageRecord{"a", "", {10, 10}});
    EXPECT_THROW(make_detector(OracleNoise{}, &m)->detect({"b", "", {0, 0, 5, 5}}), NotFound);
    OracleNoise bad;
    bad.drop_rate = 1.5;
    EXPECT_THROW(make_detector(bad, &m), InvalidArgument);
}

TEST(FileDetector, ReturnsStoredDetectionsCanonically)
{
    const auto path = temp_file("stored.json", R"({"version":1,"detections":{
        "img":[{"box":[50,50,60,60],"score":0.5,"label":"fruit"},
               {"box":[10,10,20,20],"score":0.9,"label":"fruit"},
               {"box":[0,0,5,5],"score":0.5,"label":"fruit"}]}})");
    auto det = make_detector(FileSource{path.string()});
    const auto out = det->detect({"img", "", {0, 0, 100, 100}});
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].score, 0.9);
    EXPECT_EQ(out[1].box, (Box{0, 0, 5, 5}));
    EXPECT_EQ(out[2].box, (Box{50, 50, 60, 60}));

    // per-image entries are cropped to the request and made local
    const auto tile = det->detect({"img", "", {45, 0, 100, 100}});
    ASSERT_EQ(tile.size(), 1u);
    EXPECT_EQ(tile[0].box, (Box{5, 50, 15, 60}));
}

TEST(FileDetector, PrefersPerTileEntries)
{
    const Box rect{450, 0, 950, 500};
    const std::string key = tile_key("img", rect);
    EXPECT_EQ(key, "img@450,0,500,500");
    const auto path = temp_file("tiles.json", R"({"version":1,"detections":{
        "img@450,0,500,500":[{"box":[10,10,40,40],"score":0.8,"label":"fruit"}],
        "img":[]}})");
    auto det = make_detector(FileSource{path.string()});
    const auto out = det->detect({"img", "", rect});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].box, (Box{10, 10, 40, 40}));
    EXPECT_THROW(det->detect({"other", "", rect}), NotFound);
}

TEST(Detections, SaveLoadRoundTrip)
{
    DetectionMap m;
    m["b"] = {{{1.23456, 2, 3, 4}, 0.5}, {{0, 0, 1, 1}, 0.9}};
    m["a"] = {};
    const std::string text = save_detections(m);
    const DetectionMap back = load_detections(text);
    EXPECT_EQ(save_detections(back), text);
    EXPECT_EQ(back.at("b")[0].score, 0.9);
    EXPECT_EQ(back.at("b")[1].box.x_min, 1.2346);
}

TEST(Detections, MalformedRejected)
{
    EXPECT_THROW(load_detections(R"({"version":1,"detections":{"a":[{"box":[0,0,1],"score":1}]}})"),
                 ParseError);
    EXPECT_THROW(load_detections(R"({"version":1,"detections":{"a":[{"box":[0,0,1,1],"score":2}]}})"),
                 ParseError);
    EXPECT_THROW(load_detections(R"({"version":1,"detections":{},"extra":0})"), ParseError);
    EXPECT_THROW(load_detections("not json"), ParseError);
}

TEST(External, ServesRequestsAndClipsReplies)
{
    auto det = make_detector(fake("ok"));
    const auto out = det->detect({"img", "img.ppm", {450, 0, 950, 500}});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].box, (Box{10, 10, 40, 40}));
    EXPECT_EQ(out[0].score, 0.9);
    EXPECT_EQ(out[1].box, (Box{495, 0, 500, 20}));
    // the same child serves further requests
    EXPECT_EQ(det->detect({"img", "img.ppm", {0, 0, 100, 100}}).size(), 2u);
}

TEST(External, PoolServesConcurrentCalls)
{
    auto cmd = fake("ok");
    cmd.pool_size = 3;
    auto det = make_detector(cmd);
    std::vector<std::future<std::size_t>> futures;
    for (int i = 0; i < 12; ++i)
        futures.push_back(std::async(std::launch::async, [&det, i] {
            return det->detect({"img", "", {double(i), 0, double(i) + 100, 100}}).size();
        }));
    for (auto& f : futures)
        EXPECT_EQ(f.get(), 2u);
}

TEST(External, ExplicitFailure)
{
    auto det = make_detector(fake("fail"));
    EXPECT_THROW(det->detect({"img", "", {0, 0, 10, 10}}), DetectorFailure);
}

TEST(External, GarbageReplyIsProtocolError)
{
    auto det = make_detector(fake("garbage"));
    try {
        det->detect({"img", "", {0, 0, 10, 10}});
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.line(), "this is not json");
    }
}

TEST(External, MismatchedIdIsProtocolError)
{
    auto det = make_detector(fake("wrong-id"));
    EXPECT_THROW(det->detect({"img", "", {0, 0, 10, 10}}), ProtocolError);
}

TEST(External, RejectedHandshake)
{
    EXPECT_THROW(make_detector(fake("bad-handshake")), ProtocolError);
}

TEST(External, SilentDetectorTimesOut)
{
    auto cmd = fake("silent");
    cmd.handshake_timeout_ms = 200;
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(make_detector(cmd), ProtocolError);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST(External, ChildExitIsProtocolError)
{
    auto det = make_detector(fake("exit"));
    EXPECT_THROW(det->detect({"img", "", {0, 0, 10, 10}}), ProtocolError);
}

TEST(External, MissingExecutable)
{
    ExternalCommand c;
    c.argv = {"/nonexistent/detector"};
    EXPECT_ANY_THROW(make_detector(c));
    EXPECT_THROW(make_detector(ExternalCommand{}), InvalidArgument);
}

TEST(Scene, FruitSizesAndClusters)
{
    SceneSpec spec;
    spec.clustered = 6;
    spec.seed = 4;
    const ImageRecord r = synthesize_scene(spec);
    ASSERT_EQ(r.annotations.size(), 56u);
    std::size_t overlapping_pairs = 0;
    for (std::size_t i = 0; i < r.annotations.size(); ++i) {
        const Box& b = r.annotations[i].box;
        EXPECT_GE(b.width(), 26 - 1e-9);
        EXPECT_LE(b.width(), 50 + 1e-9);
        EXPECT_TRUE((Box{0, 0, 3296, 2472}).contains(b));
        for (std::size_t j = i + 1; j < r.annotations.size(); ++j) {
            const double v = fixtures::brute_iou(b, r.annotations[j].box);
            if (v > 0) {
                ++overlapping_pairs;
                EXPECT_GE(v, 0.25 - 1e-3);
                EXPECT_LE(v, 0.5 + 1e-3);
            }
        }
    }
    EXPECT_EQ(overlapping_pairs, 6u);
    EXPECT_EQ(synthesize_scene(spec), r);
}
