// orchard: batch command line over the tiling / detection / evaluation toolkit.
//
// Exit codes: 0 success, 1 data / validation / runtime error, 2 usage error.

#include "orchard/augment.hpp"
#include "orchard/dataset.hpp"
#include "orchard/detector.hpp"
#include "orchard/error.hpp"
#include "orchard/eval.hpp"
#include "orchard/random.hpp"
#include "orchard/raster.hpp"
#include "orchard/tiling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace orchard;

namespace {

constexpr std::uint64_t kDefaultSeed = 2016;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint64_t default_seed()
{
    if (const char* env = std::getenv("OT_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("OT_SEED must be an unsigned integer, got '") + env + "'");
        }
    }
    return kDefaultSeed;
}

Size size_flag(const std::string& text, const char* flag)
{
    try {
        if (text.find_first_of("xX") == std::string::npos) {
            const Size s = parse_size((text + "x" + text).c_str());
            return s;
        }
        return parse_size(text.c_str());
    } catch (const InvalidArgument& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

void write_output(const std::string& path, const std::string& content)
{
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFound("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_command(const std::string& cmd)
{
    return {"/bin/sh", "-c", "exec " + cmd};
}

// Options shared by `detect` and `ablate` for the synthetic detector.
struct OracleFlags {
    double drop_rate = 0.0;
    double spurious_rate = 0.0;
    double jitter = 0.0;
    std::vector<double> tp_score{0.7, 1.0};
    std::vector<double> fp_score{0.0, 0.6};
    double min_visible = 1.0;

    void add(CLI::App* app)
    {
        app->add_option("--drop-rate", drop_rate, "Oracle miss probability per fruit")
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--spurious-rate", spurious_rate,
                        "Oracle false positives per region (Poisson mean)")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--jitter", jitter, "Oracle box jitter sigma in pixels")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--tp-score", tp_score, "Oracle true-positive score range lo,hi")
            ->delimiter(',')
            ->expected(2);
        app->add_option("--fp-score", fp_score, "Oracle false-positive score range lo,hi")
            ->delimiter(',')
            ->expected(2);
        app->add_option("--min-visible", min_visible,
                        "Oracle reports fruit at least this visible in a region")
            ->check(CLI::Range(0.0, 1.0));
    }

    OracleNoise noise(std::uint64_t seed) const
    {
        OracleNoise n;
        n.drop_rate = drop_rate;
        n.spurious_rate = spurious_rate;
        n.jitter_sigma = jitter;
        n.tp_score_range = {tp_score[0], tp_score[1]};
        n.fp_score_range = {fp_score[0], fp_score[1]};
        n.min_visible_fraction = min_visible;
        n.seed = seed;
        return n;
    }
};

struct TilingFlags {
    std::string tile = "500";
    int overlap = 50;
    double score_threshold = 0.0;
    double nms_iou = 0.3;

    void add(CLI::App* app, bool with_fusion)
    {
        app->add_option("--tile", tile, "Tile size, N or WxH")->capture_default_str();
        app->add_option("--overlap", overlap, "Tile overlap in pixels")->capture_default_str();
        if (with_fusion) {
            app->add_option("--score-threshold", score_threshold, "Fusion score threshold")
                ->check(CLI::Range(0.0, 1.0));
            app->add_option("--nms", nms_iou, "Fusion NMS IoU threshold")
                ->check(CLI::Range(0.0, 1.0))
                ->capture_default_str();
        }
    }

    TilingConfig config() const
    {
        TilingConfig cfg;
        cfg.tile_size = size_flag(tile, "--tile");
        cfg.overlap = overlap;
        cfg.proposal.score_threshold = score_threshold;
        cfg.proposal.nms_iou = nms_iou;
        try {
            cfg.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

// ---------------------------------------------------------------------------

struct PlanCmd {
    std::string image, manifest, out;
    TilingFlags tiling;

    void add(CLI::App& app)
    {
        auto* c = app.add_subcommand("plan", "Plan overlapping tiles over an image");
        c->add_option("--image", image, "Image size WxH");
        c->add_option("--manifest", manifest, "Plan every image of a manifest");
        c->add_option("--out", out, "Output file (default stdout)");
        tiling.add(c, false);
        c->callback([this] { run(); });
    }

    void run()
    {
        if (image.empty() == manifest.empty())
            throw UsageError("plan: give exactly one of --image or --manifest");
        const TilingConfig cfg = tiling.config();
        if (!image.empty()) {
            write_output(out, dump(plan_tiles(size_flag(image, "--image"), cfg).to_json()));
            return;
        }
        const Manifest m = load_manifest_file(manifest);
        json plans = json::object();
        for (const auto& r : m.images)
            plans[r.id] = plan_tiles(r.size, cfg).to_json();
        write_output(out, dump({{"plans", plans}}));
    }
};

struct SynthCmd {
    std::string id = "tree", image = "3296x2472", split = "test", fruit_name = "mango", out;
    std::string path;
    int fruit = 56, clustered = 0;
    double min_side = 26.0, max_side = 50.0;
    std::uint64_t seed = 0;

    void add(CLI::App& app, std::uint64_t default_seed)
    {
        seed = default_seed;
        auto* c = app.add_subcommand("synth", "Generate a synthetic ground-truth scene manifest");
        c->add_option("--id", id)->capture_default_str();
        c->add_option("--image", image, "Image size WxH")->capture_default_str();
        c->add_option("--path", path, "Raster locator recorded for the scene");
        c->add_option("--fruit", fruit, "Number of fruit")->capture_default_str();
        c->add_option("--clustered", clustered, "Fruit placed overlapping another fruit");
        c->add_option("--min-side", min_side)->capture_default_str();
        c->add_option("--max-side", max_side)->capture_default_str();
        c->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--fruit-name", fruit_name)->capture_default_str();
        c->add_option("--seed", seed)->capture_default_str();
        c->add_option("--out", out, "Output manifest (default stdout)");
        c->callback([this] { run(); });
    }

    void run()
    {
        SceneSpec spec;
        spec.id = id;
        spec.path = path;
        spec.image = size_flag(image, "--image");
        spec.fruit = fruit;
        spec.clustered = clustered;
        spec.min_side = min_side;
        spec.max_side = max_side;
        spec.split = parse_split(split);
        spec.seed = seed;
        Manifest m;
        m.fruit = fruit_name;
        m.images.push_back(synthesize_scene(spec));
        m.metadata = {{"synthetic", true}, {"seed", seed}};
        write_output(out, save_manifest(m));
    }
};

struct DetectCmd {
    std::string manifest, kind = "oracle", detections, command, split, out;
    int handshake_ms = 5000, pool = 1, parallel = 1;
    std::uint64_t seed = 0;
    OracleFlags oracle;
    TilingFlags tiling;

    void add(CLI::App& app, std::uint64_t default_seed)
    {
        seed = default_seed;
        auto* c = app.add_subcommand("detect", "Tiled detection with threshold + NMS fusion");
        c->add_option("--manifest", manifest, "Ground-truth / image manifest")->required();
        c->add_option("--detector", kind, "oracle | file | external")
            ->check(CLI::IsMember({"oracle", "file", "external"}))
            ->capture_default_str();
        c->add_option("--detections", detections, "Detections manifest for --detector file");
        c->add_option("--command", command, "Detector command for --detector external");
        c->add_option("--handshake-timeout-ms", handshake_ms)->capture_default_str();
        c->add_option("--pool", pool, "External detector processes")->check(CLI::PositiveNumber);
        c->add_option("--parallel", parallel, "Tiles dispatched concurrently")
            ->check(CLI::PositiveNumber);
        c->add_option("--split", split, "Only images of this split")
            ->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--seed", seed, "Oracle seed")->capture_default_str();
        c->add_option("--out", out, "Output detections manifest (default stdout)");
        oracle.add(c);
        tiling.add(c, true);
        c->callback([this] { run(); });
    }

    void run()
    {
        TilingConfig cfg = tiling.config();
        cfg.parallelism = parallel;
        DetectorSpec spec;
        if (kind == "oracle") {
            spec = oracle.noise(seed);
        } else if (kind == "file") {
            if (detections.empty())
                throw UsageError("detect: --detector file needs --detections");
            spec = FileSource{detections};
        } else {
            if (command.empty())
                throw UsageError("detect: --detector external needs --command");
            spec = ExternalCommand{split_command(command), handshake_ms, 60000, pool};
        }

        const Manifest m = load_manifest_file(manifest);
        auto detector = make_detector(spec, &m);
        DetectionMap result;
        for (const auto& rec : m.images) {
            if (!split.empty() && rec.split != parse_split(split))
                continue;
            const TilePlan plan = plan_tiles(rec.size, cfg);
            const auto pooled = run_tiled(rec, plan, *detector, cfg.parallelism);
            result[rec.id] = fuse(pooled, cfg);
        }
        write_output(out, save_detections(result));
    }
};

struct EvaluateCmd {
    std::string manifest, detections, split, out_dir;
    double iou = 0.2;
    double threshold = -1.0;
    bool relax = false;

    void add(CLI::App& app)
    {
        auto* c = app.add_subcommand("evaluate", "Match, PR curve, AP and F1 on a split");
        c->add_option("--manifest", manifest, "Ground-truth manifest")->required();
        c->add_option("--detections", detections, "Detections manifest")->required();
        c->add_option("--split", split, "val selects a threshold, test applies one")
            ->required()
            ->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--iou", iou, "Match IoU threshold")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        c->add_option("--threshold", threshold, "Operating score threshold")
            ->check(CLI::Range(0.0, 1.0));
        c->add_flag("--relax-clusters", relax, "Let one detection represent a fruit cluster");
        c->add_option("--out-dir", out_dir, "Write metrics.json and pr.csv here");
        c->callback([this] { run(); });
    }

    void run()
    {
        const Manifest m = load_manifest_file(manifest);
        const DetectionMap dets = load_detections_file(detections);
        const Split s = parse_split(split);
        MatchConfig mc;
        mc.iou_threshold = iou;

        std::set<std::string> split_ids;
        for (const auto& r : m.images)
            if (r.split == s)
                split_ids.insert(r.id);
        std::vector<std::string> missing;
        for (const auto& [key, list] : dets) {
            const std::string id = key.substr(0, key.find('@'));
            if (!split_ids.count(id))
                missing.push_back(id);
        }
        if (!missing.empty())
            throw ValidationError({"detections reference images not in the " + split +
                                   " split: " + [&] {
                                       std::string ids;
                                       for (const auto& id : missing)
                                           ids += (ids.empty() ? "" : ", ") + id;
                                       return ids;
                                   }()});

        std::vector<ImageEval> evals;
        for (const auto& r : m.images) {
            if (r.split != s)
                continue;
            ImageEval e;
            e.ground_truth = r.boxes();
            if (auto it = dets.find(r.id); it != dets.end())
                e.detections = it->second;
            evals.push_back(std::move(e));
        }

        const PRCurve curve = pr_curve(evals, mc);
        Metrics metrics;
        if (threshold >= 0.0) {
            metrics = evaluate_at_threshold(evals, threshold, mc, relax);
        } else if (curve.points.empty()) {
            metrics.fn = curve.total_ground_truth;
        } else {
            const double t = select_operating_threshold(curve).first;
            metrics = evaluate_at_threshold(evals, t, mc, relax);
        }
        metrics.ap = average_precision(curve);

        const std::string metrics_json = dump(metrics.to_json());
        if (out_dir.empty()) {
            std::cout << metrics_json;
            return;
        }
        fs::create_directories(out_dir);
        write_output((fs::path(out_dir) / "metrics.json").string(), metrics_json);
        write_output((fs::path(out_dir) / "pr.csv").string(), pr_curve_csv(curve));
    }
};

struct SampleCmd {
    std::string manifest, patch = "500x500", split, out;
    int count = 1;
    double min_visible = 0.25;
    bool keep_empty = false;
    std::uint64_t seed = 0;

    void add(CLI::App& app, std::uint64_t default_seed)
    {
        seed = default_seed;
        auto* c = app.add_subcommand("sample", "Sample sub-image patches from raw images");
        c->add_option("--manifest", manifest, "Raw-image manifest")->required();
        c->add_option("--patch", patch, "Patch size WxH")->capture_default_str();
        c->add_option("--count", count, "Patches per image")->check(CLI::PositiveNumber);
        c->add_option("--min-visible", min_visible, "Minimum visible fraction of a cut fruit")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        c->add_option("--split", split, "Only images of this split")
            ->check(CLI::IsMember({"train", "val", "test"}));
        c->add_flag("--keep-empty", keep_empty, "Keep training patches without fruit");
        c->add_option("--seed", seed)->capture_default_str();
        c->add_option("--out", out, "Output manifest (default stdout)");
        c->callback([this] { run(); });
    }

    void run()
    {
        const Manifest m = load_manifest_file(manifest);
        PatchSpec spec;
        spec.patch_size = size_flag(patch, "--patch");
        spec.count = count;
        spec.min_visible_fraction = min_visible;
        spec.seed = seed;

        Manifest result;
        result.fruit = m.fruit;
        result.metadata = m.metadata;
        for (const auto& rec : m.images) {
            if (!split.empty() && rec.split != parse_split(split))
                continue;
            auto patches = sample_subimages(rec, spec);
            // Only the training split drops fruitless images.
            if (rec.split == Split::train && !keep_empty)
                patches = discard_empty(std::move(patches));
            result.images.insert(result.images.end(), patches.begin(), patches.end());
        }
        write_output(out, save_manifest(result));
    }
};

Image load_record_image(const ImageRecord& rec)
{
    Image img = read_ppm(rec.path);
    if (rec.origin && img.size() != rec.size) {
        return img.crop(int(rec.origin->x), int(rec.origin->y), rec.size.width,
                        rec.size.height);
    }
    if (img.size() != rec.size)
        throw ValidationError({"image '" + rec.id + "' is " + std::to_string(img.width()) + "x" +
                               std::to_string(img.height()) + " on disk but " +
                               std::to_string(rec.size.width) + "x" +
                               std::to_string(rec.size.height) + " in the manifest"});
    return img;
}

struct AugmentCmd {
    std::string manifest, id, stats, out_image, out;
    double flip_probability = 0.5;
    std::vector<int> scales{300, 500, 700};
    bool no_pca = false;
    std::uint64_t seed = 0;

    void add(CLI::App& app, std::uint64_t default_seed)
    {
        seed = default_seed;
        auto* c = app.add_subcommand("augment", "Apply one sampled flip/scale/PCA augmentation");
        c->add_option("--manifest", manifest)->required();
        c->add_option("--id", id, "Image id")->required();
        c->add_option("--stats", stats, "Colour statistics JSON (enables PCA jitter)");
        c->add_option("--flip-prob", flip_probability)->check(CLI::Range(0.0, 1.0));
        c->add_option("--scales", scales, "Shorter-side choices")->delimiter(',');
        c->add_flag("--no-pca", no_pca);
        c->add_option("--seed", seed, "Epoch seed")->capture_default_str();
        c->add_option("--out-image", out_image, "Augmented PPM")->required();
        c->add_option("--out", out, "Augmented record JSON (default stdout)");
        c->callback([this] { run(); });
    }

    void run()
    {
        AugmentationSpec spec;
        spec.flip_probability = flip_probability;
        spec.scale_choices = scales;
        spec.pca_enabled = !no_pca && !stats.empty();
        try {
            spec.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }

        const Manifest m = load_manifest_file(manifest);
        const ImageRecord* rec = m.find(id);
        if (!rec)
            throw NotFound("no image '" + id + "' in " + manifest);
        std::optional<ColorStats> cs;
        if (!stats.empty())
            cs = ColorStats::from_json(json::parse(read_file(stats)));

        const AppliedAugmentation applied = sample_augmentation(spec, derive_seed(seed, id));
        const Image img = load_record_image(*rec);
        Augmented aug = apply_augmentation(img, rec->annotations, applied,
                                           spec.pca_enabled && cs ? &*cs : nullptr);
        write_ppm(aug.image, out_image);

        Manifest single;
        single.fruit = m.fruit;
        ImageRecord outrec = *rec;
        outrec.id = rec->id + "_aug";
        outrec.path = out_image;
        outrec.size = aug.image.size();
        outrec.origin.reset();
        outrec.annotations = aug.annotations;
        single.images.push_back(outrec);
        single.metadata = {{"augmentation",
                            {{"flipped", applied.flipped},
                             {"chosen_shorter_side", applied.chosen_shorter_side},
                             {"alphas",
                              {round4(applied.alphas[0]), round4(applied.alphas[1]),
                               round4(applied.alphas[2])}},
                             {"factor", round4(aug.factor)}}}};
        write_output(out, save_manifest(single));
    }
};

struct PcaStatsCmd {
    std::string manifest, split, out;
    std::vector<std::string> images;
    int stride = 1;

    void add(CLI::App& app)
    {
        auto* c = app.add_subcommand("pca-stats", "Principal components of corpus pixel colours");
        c->add_option("--manifest", manifest, "Use every image of the manifest");
        c->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--image", images, "PPM files")->expected(0, -1);
        c->add_option("--stride", stride, "Use every n-th pixel")->check(CLI::PositiveNumber);
        c->add_option("--out", out, "Output JSON (default stdout)");
        c->callback([this] { run(); });
    }

    void run()
    {
        std::vector<Image> rasters;
        if (!manifest.empty()) {
            const Manifest m = load_manifest_file(manifest);
            for (const auto& r : m.images)
                if (split.empty() || r.split == parse_split(split))
                    rasters.push_back(load_record_image(r));
        }
        for (const auto& p : images)
            rasters.push_back(read_ppm(p));
        if (rasters.empty())
            throw UsageError("pca-stats: give --manifest or --image");

        std::vector<Rgb> pixels;
        std::size_t k = 0;
        for (const auto& img : rasters) {
            const auto& d = img.data();
            for (std::size_t i = 0; i < d.size(); i += 3, ++k)
                if (k % std::size_t(stride) == 0)
                    pixels.push_back({d[i], d[i + 1], d[i + 2]});
        }
        write_output(out, dump(compute_color_stats(pixels).to_json()));
    }
};

struct AblateCmd {
    std::string manifest, out, csv;
    std::vector<int> sizes;
    std::vector<double> drop_rates;
    int repeats = 10;
    double iou = 0.2, nms_iou = 0.3, score_threshold = 0.0;
    std::uint64_t seed = 0;
    OracleFlags oracle;

    void add(CLI::App& app, std::uint64_t default_seed)
    {
        seed = default_seed;
        auto* c = app.add_subcommand("ablate", "AP versus number of training images");
        c->add_option("--manifest", manifest)->required();
        c->add_option("--sizes", sizes, "Training-set sizes")->delimiter(',')->required();
        c->add_option("--repeats", repeats)->check(CLI::PositiveNumber)->capture_default_str();
        c->add_option("--drop-rates", drop_rates,
                      "Oracle drop rate per size (same length as --sizes)")
            ->delimiter(',');
        c->add_option("--iou", iou)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        c->add_option("--nms", nms_iou)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        c->add_option("--score-threshold", score_threshold)->check(CLI::Range(0.0, 1.0));
        c->add_option("--seed", seed)->capture_default_str();
        c->add_option("--out", out, "Report JSON (default stdout)");
        c->add_option("--csv", csv, "Also write the report as CSV");
        oracle.add(c);
        c->callback([this] { run(); });
    }

    void run()
    {
        if (!drop_rates.empty() && drop_rates.size() != sizes.size())
            throw UsageError("ablate: --drop-rates needs one value per --sizes entry");
        const Manifest m = load_manifest_file(manifest);
        AblationConfig cfg;
        cfg.sizes = sizes;
        cfg.repeats = repeats;
        cfg.seed = seed;
        cfg.match.iou_threshold = iou;
        cfg.proposal.nms_iou = nms_iou;
        cfg.proposal.score_threshold = score_threshold;

        const AblationReport report =
            ablate(m, cfg, [&](int n, const std::vector<ImageRecord>&, std::uint64_t draw_seed) {
                OracleNoise noise = oracle.noise(draw_seed);
                if (!drop_rates.empty()) {
                    const auto at = std::find(sizes.begin(), sizes.end(), n) - sizes.begin();
                    noise.drop_rate = drop_rates[std::size_t(at)];
                }
                return DetectorSpec{noise};
            });
        write_output(out, dump(report.to_json()));
        if (!csv.empty())
            write_output(csv, report.to_csv());
    }
};

struct ReportCmd {
    std::string ablation, manifest, detections, split = "test", out;
    double iou = 0.2;

    void add(CLI::App& app)
    {
        auto* c = app.add_subcommand("report", "Emit plot-ready CSV");
        c->add_option("--ablation", ablation, "Ablation report JSON");
        c->add_option("--manifest", manifest, "Ground truth for a PR curve");
        c->add_option("--detections", detections, "Detections for a PR curve");
        c->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--iou", iou)->check(CLI::Range(0.0, 1.0));
        c->add_option("--out", out, "Output CSV (default stdout)");
        c->callback([this] { run(); });
    }

    void run()
    {
        if (!ablation.empty()) {
            const json j = json::parse(read_file(ablation));
            AblationReport r;
            for (const auto& row : j.at("rows"))
                r.rows.push_back({row.at("n_train").get<int>(), row.at("repeats").get<int>(),
                                  row.at("ap_mean").get<double>(), row.at("ap_std").get<double>(),
                                  {}});
            write_output(out, r.to_csv());
            return;
        }
        if (manifest.empty() || detections.empty())
            throw UsageError("report: give --ablation, or --manifest with --detections");
        const Manifest m = load_manifest_file(manifest);
        const DetectionMap dets = load_detections_file(detections);
        const Split s = parse_split(split);
        std::vector<ImageEval> evals;
        for (const auto& r : m.images) {
            if (r.split != s)
                continue;
            ImageEval e{{}, r.boxes()};
            if (auto it = dets.find(r.id); it != dets.end())
                e.detections = it->second;
            evals.push_back(std::move(e));
        }
        MatchConfig mc;
        mc.iou_threshold = iou;
        write_output(out, pr_curve_csv(pr_curve(evals, mc)));
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Tiled fruit detection, fusion and evaluation toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = kDefaultSeed;
    try {
        seed = default_seed();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    PlanCmd plan;
    SynthCmd synth;
    DetectCmd detect;
    EvaluateCmd evaluate;
    SampleCmd sample;
    AugmentCmd augment;
    PcaStatsCmd pca;
    AblateCmd ablate_cmd;
    ReportCmd report;
    plan.add(app);
    synth.add(app, seed);
    detect.add(app, seed);
    evaluate.add(app);
    sample.add(app, seed);
    augment.add(app, seed);
    pca.add(app);
    ablate_cmd.add(app, seed);
    report.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
