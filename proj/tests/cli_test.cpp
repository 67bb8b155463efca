#include "orchard/dataset.hpp"
#include "orchard/detector.hpp"
#include "orchard/raster.hpp"

#include "support/process.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdio>

using namespace orchard;
using namespace orchard::fixtures;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

const std::string kCli = std::string("'") + ORCHARD_CLI + "'";

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = scratch(::testing::UnitTest::GetInstance()->current_test_info()->name());
    }

    RunResult cli(const std::string& args) const
    {
        return run("cd " + quote(dir) + " && " + kCli + " " + args);
    }

    fs::path dir;
};

} // namespace

TEST_F(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(cli("").exit_code, 2);
    EXPECT_EQ(cli("bogus").exit_code, 2);
    EXPECT_EQ(cli("plan --image 3296x2472 --no-such-flag").exit_code, 2);
    EXPECT_EQ(cli("plan --image 12x").exit_code, 2);
    EXPECT_EQ(cli("plan").exit_code, 2);
    EXPECT_EQ(cli("plan --image 1000x1000 --overlap 600").exit_code, 2);
    EXPECT_EQ(cli("evaluate --manifest m.json --detections d.json").exit_code, 2);
    EXPECT_EQ(run("cd " + quote(dir) + " && OT_SEED=abc " + kCli + " plan --image 5x5").exit_code, 2);
}

TEST_F(Cli, HelpExitsZero)
{
    EXPECT_EQ(cli("--help").exit_code, 0);
}

TEST_F(Cli, DataErrorsExitOne)
{
    EXPECT_EQ(cli("plan --manifest missing.json").exit_code, 1);
    spit(dir / "bad.json", "{\"version\": 1,");
    EXPECT_EQ(cli("plan --manifest bad.json").exit_code, 1);
}

TEST_F(Cli, PlanMangoImage)
{
    const RunResult r = cli("plan --image 3296x2472 --tile 500 --overlap 50");
    ASSERT_EQ(r.exit_code, 0);
    const json j = json::parse(r.out);
    EXPECT_EQ(j["tile_count"], 48);
    EXPECT_EQ(j["tiles"].back(), json({2796, 1972, 3296, 2472}));
}

TEST_F(Cli, SynthDetectEvaluatePipeline)
{
    ASSERT_EQ(cli("synth --seed 5 --out gt.json").exit_code, 0);
    ASSERT_EQ(cli("detect --manifest gt.json --out dets.json").exit_code, 0);
    const DetectionMap d = load_detections_file((dir / "dets.json").string());
    ASSERT_EQ(d.at("tree").size(), 56u);

    const RunResult ev = cli("evaluate --manifest gt.json --detections dets.json --split test");
    ASSERT_EQ(ev.exit_code, 0);
    const json m = json::parse(ev.out);
    EXPECT_EQ(m["ap"], 1.0);
    EXPECT_EQ(m["f1"], 1.0);
    EXPECT_EQ(m["tp"], 56);

    ASSERT_EQ(cli("evaluate --manifest gt.json --detections dets.json --split test --out-dir res")
                  .exit_code,
              0);
    EXPECT_TRUE(fs::exists(dir / "res" / "metrics.json"));
    EXPECT_EQ(slurp(dir / "res" / "pr.csv").substr(0, 27), "threshold,precision,recall\n");
}

TEST_F(Cli, DetectSeededTwoDropOracle)
{
    ASSERT_EQ(cli("synth --seed 2016 --out gt.json").exit_code, 0);
    const Manifest m = load_manifest_file((dir / "gt.json").string());
    OracleNoise noise;
    noise.drop_rate = 2.0 / 56.0;
    const auto seed = seed_with_drops(m.images[0], noise, 2);
    const std::string args = "detect --manifest gt.json --drop-rate " + fmt(noise.drop_rate) +
                             " --seed " + std::to_string(seed);
    ASSERT_EQ(cli(args + " --out a.json").exit_code, 0);
    ASSERT_EQ(cli(args + " --out b.json").exit_code, 0);
    EXPECT_EQ(load_detections_file((dir / "a.json").string()).at("tree").size(), 54u);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
}

TEST_F(Cli, DetectWithFileAndExternalDetectors)
{
    ASSERT_EQ(cli("synth --image 950x500 --fruit 4 --out gt.json").exit_code, 0);
    ASSERT_EQ(cli("detect --manifest gt.json --detector file").exit_code, 2);
    ASSERT_EQ(cli("detect --manifest gt.json --out whole.json").exit_code, 0);
    const RunResult f = cli("detect --manifest gt.json --detector file --detections whole.json");
    ASSERT_EQ(f.exit_code, 0);
    EXPECT_EQ(f.out, slurp(dir / "whole.json"));

    const std::string fake = std::string("'") + FAKE_DETECTOR + "'";
    const RunResult ok = cli("detect --manifest gt.json --detector external --command \"" + fake +
                             " ok\" --pool 2 --parallel 2");
    ASSERT_EQ(ok.exit_code, 0);
    EXPECT_EQ(load_detections(ok.out).at("tree").size(), 4u);
    EXPECT_EQ(cli("detect --manifest gt.json --detector external --command \"" + fake + " fail\"")
                  .exit_code,
              1);
    EXPECT_EQ(cli("detect --manifest gt.json --detector external --command \"" + fake +
                  " bad-handshake\"")
                  .exit_code,
              1);
}

TEST_F(Cli, EvaluateRejectsForeignIds)
{
    ASSERT_EQ(cli("synth --split val --out gt.json").exit_code, 0);
    spit(dir / "d.json", R"({"version":1,"detections":{"ghost":[],"tree":[]}})");
    const RunResult r = cli("evaluate --manifest gt.json --detections d.json --split test");
    EXPECT_EQ(r.exit_code, 1);
    const std::string err = run("(cd " + quote(dir) + " && " + kCli +
                                " evaluate --manifest gt.json --detections d.json --split test"
                                " 2>&1 >/dev/null)")
                                .out;
    EXPECT_NE(err.find("ghost"), std::string::npos) << err;
}

TEST_F(Cli, SampleIsReproducible)
{
    ASSERT_EQ(cli("synth --split train --out raw.json").exit_code, 0);
    const std::string args = "sample --manifest raw.json --patch 500x500 --count 10 --seed 7";
    const RunResult a = cli(args), b = cli(args);
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_EQ(a.out, b.out);
    const Manifest m = load_manifest(a.out);
    for (const auto& r : m.images)
        EXPECT_FALSE(r.annotations.empty()); // training patches without fruit dropped
}

TEST_F(Cli, OtSeedOverridesDefault)
{
    const std::string env = "cd " + quote(dir) + " && OT_SEED=99 " + kCli;
    EXPECT_EQ(run(env + " synth").out, cli("synth --seed 99").out);
    EXPECT_NE(cli("synth").out, cli("synth --seed 99").out);
}

TEST_F(Cli, PcaStatsOnConstantColour)
{
    write_ppm(Image(20, 10, {0.2f, 0.4f, 0.6f}), dir / "flat.ppm");
    const RunResult r = cli("pca-stats --image flat.ppm");
    ASSERT_EQ(r.exit_code, 0);
    for (double v : json::parse(r.out)["eigvals"])
        EXPECT_EQ(v, 0.0);
}

TEST_F(Cli, AugmentIsReproducible)
{
    Image img(40, 30);
    for (std::size_t i = 0; i < img.data().size(); ++i)
        img.data()[i] = float(i % 256) / 255.0f;
    write_ppm(img, dir / "a.ppm");
    spit(dir / "m.json", R"({"version":1,"fruit":"apple","images":[
        {"id":"a","path":"a.ppm","width":40,"height":30,"split":"train",
         "annotations":[{"label":"fruit","shape":"box","box":[2,3,12,13]}]}]})");
    ASSERT_EQ(cli("pca-stats --image a.ppm --out stats.json").exit_code, 0);
    const std::string args = "augment --manifest m.json --id a --stats stats.json --scales 60 --seed 3";
    const RunResult a = cli(args + " --out-image a1.ppm"), b = cli(args + " --out-image a1.ppm");
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_EQ(a.out, b.out);
    const Image out = read_ppm(dir / "a1.ppm");
    EXPECT_EQ(out.size(), (Size{80, 60}));
    EXPECT_EQ(cli("augment --manifest m.json --id nope --out-image x.ppm").exit_code, 1);
}

TEST_F(Cli, AblateAndReport)
{
    Manifest m;
    m.fruit = "apple";
    for (int i = 0; i < 30; ++i) {
        SceneSpec s;
        s.id = "img" + std::to_string(i);
        s.image = {500, 500};
        s.fruit = 5;
        s.seed = std::uint64_t(i);
        s.split = i < 26 ? Split::train : Split::test;
        m.images.push_back(synthesize_scene(s));
    }
    spit(dir / "m.json", save_manifest(m));
    const std::string args = "ablate --manifest m.json --sizes 5,10,25 --repeats 10 --seed 4";
    const RunResult a = cli(args + " --out rep.json --csv rep.csv");
    ASSERT_EQ(a.exit_code, 0);
    const json rep = json::parse(slurp(dir / "rep.json"));
    ASSERT_EQ(rep["rows"].size(), 3u);
    for (const auto& row : rep["rows"])
        EXPECT_EQ(row["samples"].size(), 10u);
    EXPECT_EQ(cli(args).out, slurp(dir / "rep.json"));

    const RunResult csv = cli("report --ablation rep.json");
    ASSERT_EQ(csv.exit_code, 0);
    EXPECT_EQ(csv.out, slurp(dir / "rep.csv"));
    EXPECT_EQ(cli(args + " --drop-rates 0.1,0.2").exit_code, 2);
    EXPECT_EQ(cli("ablate --manifest m.json --sizes 5,40").exit_code, 1);
}
