#include "orchard/eval.hpp"

#include "orchard/error.hpp"
#include "orchard/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace orchard {

using nlohmann::json;

namespace {

double round6(double v)
{
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;
}

double ratio(std::size_t num, std::size_t den)
{
    return den == 0 ? 0.0 : double(num) / double(den);
}

} // namespace

void MatchConfig::validate() const
{
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw InvalidArgument("match IoU threshold must lie in (0, 1]");
    if (!one_to_one)
        throw InvalidArgument("only one-to-one matching is supported");
}

double MatchResult::precision() const noexcept
{
    return ratio(tp.size(), tp.size() + fp.size());
}

double MatchResult::recall() const noexcept
{
    return ratio(tp.size(), tp.size() + fn.size());
}

json Metrics::to_json() const
{
    return {{"ap", round6(ap)},
            {"precision", round6(precision)},
            {"recall", round6(recall)},
            {"f1", round6(f1)},
            {"operating_threshold", round6(operating_threshold)},
            {"tp", tp},
            {"fp", fp},
            {"fn", fn}};
}

json AblationReport::to_json() const
{
    json arr = json::array();
    for (const auto& r : rows) {
        json samples = json::array();
        for (double s : r.samples)
            samples.push_back(round6(s));
        arr.push_back({{"n_train", r.n_train},
                       {"repeats", r.repeats},
                       {"ap_mean", round6(r.ap_mean)},
                       {"ap_std", round6(r.ap_std)},
                       {"samples", samples}});
    }
    return {{"rows", arr}};
}

std::string AblationReport::to_csv() const
{
    std::string out = "n_train,repeats,ap_mean,ap_std\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", r.n_train, r.repeats, r.ap_mean,
                      r.ap_std);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

// Canonically ordered detections paired with whether each one matched, and
// which ground truth it took.
struct GreedyMatch {
    std::vector<Detection> order;
    std::vector<int> gt_of;
};

GreedyMatch greedy_match(std::span<const Detection> dets, std::span<const Box> gts,
                         double iou_threshold)
{
    GreedyMatch m;
    m.order.assign(dets.begin(), dets.end());
    sort_canonical(m.order);
    m.gt_of.assign(m.order.size(), -1);
    std::vector<char> taken(gts.size(), 0);
    for (std::size_t i = 0; i < m.order.size(); ++i) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g])
                continue;
            const double v = iou(m.order[i].box, gts[g]);
            if (v > best_iou) {
                best_iou = v;
                best = int(g);
            }
        }
        if (best >= 0 && best_iou >= iou_threshold) {
            taken[std::size_t(best)] = 1;
            m.gt_of[i] = best;
        }
    }
    return m;
}

} // namespace

MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gts,
                             const MatchConfig& cfg)
{
    cfg.validate();
    const GreedyMatch m = greedy_match(dets, gts, cfg.iou_threshold);
    MatchResult r;
    std::vector<char> taken(gts.size(), 0);
    for (std::size_t i = 0; i < m.order.size(); ++i) {
        if (m.gt_of[i] >= 0) {
            taken[std::size_t(m.gt_of[i])] = 1;
            r.tp.push_back({m.order[i], gts[std::size_t(m.gt_of[i])]});
        } else {
            r.fp.push_back(m.order[i]);
        }
    }
    for (std::size_t g = 0; g < gts.size(); ++g)
        if (!taken[g])
            r.fn.push_back(gts[g]);
    return r;
}

MatchResult relax_clusters(const MatchResult& result, const MatchConfig& cfg)
{
    cfg.validate();
    MatchResult out;
    out.tp = result.tp;
    out.fp = result.fp;
    for (const Box& g : result.fn) {
        const bool represented =
            std::any_of(result.tp.begin(), result.tp.end(), [&](const MatchedPair& p) {
                return iou(p.detection.box, g) >= cfg.iou_threshold;
            });
        if (!represented)
            out.fn.push_back(g);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Curves

PRCurve pr_curve(std::span<const ImageEval> per_image, const MatchConfig& cfg)
{
    cfg.validate();
    PRCurve curve;
    for (const auto& img : per_image)
        curve.total_ground_truth += img.ground_truth.size();
    if (curve.total_ground_truth == 0)
        throw InvalidArgument("PR curve needs at least one ground truth");

    // Greedy matching visits detections in score order, so the matches made
    // at any threshold are exactly the prefix of the full matching.
    std::vector<std::pair<double, bool>> pooled;
    for (const auto& img : per_image) {
        const GreedyMatch m = greedy_match(img.detections, img.ground_truth, cfg.iou_threshold);
        for (std::size_t i = 0; i < m.order.size(); ++i)
            pooled.emplace_back(m.order[i].score, m.gt_of[i] >= 0);
    }
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        (pooled[i].second ? tp : fp) += 1;
        const bool last_at_score = i + 1 == pooled.size() || pooled[i + 1].first != pooled[i].first;
        if (!last_at_score)
            continue;
        curve.points.push_back({pooled[i].first, ratio(tp, tp + fp),
                                ratio(tp, curve.total_ground_truth), tp, fp});
    }
    return curve;
}

double average_precision(const PRCurve& curve)
{
    const auto& pts = curve.points;
    if (pts.empty())
        return 0.0;
    std::vector<double> envelope(pts.size());
    double running = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
        running = std::max(running, pts[i].precision);
        envelope[i] = running;
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ap += (pts[i].recall - prev_recall) * envelope[i];
        prev_recall = pts[i].recall;
    }
    return std::clamp(ap, 0.0, 1.0);
}

double f1_score(double precision, double recall) noexcept
{
    const double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

std::pair<double, Metrics> select_operating_threshold(const PRCurve& curve)
{
    if (curve.points.empty())
        throw InvalidArgument("cannot select a threshold on an empty PR curve");
    std::size_t best = 0;
    double best_f1 = -1.0;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const double f = f1_score(curve.points[i].precision, curve.points[i].recall);
        if (f >= best_f1) {
            best_f1 = f;
            best = i;
        }
    }
    const PRPoint& p = curve.points[best];
    Metrics m;
    m.ap = average_precision(curve);
    m.precision = p.precision;
    m.recall = p.recall;
    m.f1 = best_f1;
    m.operating_threshold = p.threshold;
    m.tp = p.tp;
    m.fp = p.fp;
    m.fn = curve.total_ground_truth - p.tp;
    return {p.threshold, m};
}

Metrics evaluate_at_threshold(std::span<const ImageEval> per_image, double threshold,
                              const MatchConfig& cfg, bool relax)
{
    Metrics m;
    m.operating_threshold = threshold;
    for (const auto& img : per_image) {
        std::vector<Detection> kept;
        for (const auto& d : img.detections)
            if (d.score >= threshold)
                kept.push_back(d);
        MatchResult r = match_detections(kept, img.ground_truth, cfg);
        if (relax)
            r = relax_clusters(r, cfg);
        m.tp += r.tp.size();
        m.fp += r.fp.size();
        m.fn += r.fn.size();
    }
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.f1 = f1_score(m.precision, m.recall);
    // AP is threshold-free; an empty ground truth leaves it at 0.
    if (m.tp + m.fn > 0)
        m.ap = average_precision(pr_curve(per_image, cfg));
    return m;
}

std::string pr_curve_csv(const PRCurve& curve)
{
    std::string out = "threshold,precision,recall\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.threshold, p.precision, p.recall);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ablation

AblationReport ablate(const Manifest& manifest, const AblationConfig& cfg,
                      const DetectorFactory& factory)
{
    cfg.match.validate();
    cfg.proposal.validate();
    if (cfg.repeats < 1)
        throw InvalidArgument("repeats must be >= 1");
    if (cfg.sizes.empty())
        throw InvalidArgument("ablation needs at least one training-set size");
    const auto pool = manifest.split(Split::train);
    const auto test = manifest.split(Split::test);

    std::string offenders;
    for (int n : cfg.sizes) {
        if (n < 1 || std::size_t(n) > pool.size())
            offenders += (offenders.empty() ? "" : ", ") + std::to_string(n);
    }
    if (!offenders.empty())
        throw InvalidArgument("invalid training-set sizes (pool has " +
                              std::to_string(pool.size()) + " images): " + offenders);
    if (test.empty())
        throw InvalidArgument("ablation needs a non-empty test split");

    AblationReport report;
    for (int n : cfg.sizes) {
        AblationRow row;
        row.n_train = n;
        row.repeats = cfg.repeats;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            const std::uint64_t draw_seed =
                derive_seed(derive_seed(cfg.seed, std::uint64_t(n)), std::uint64_t(rep));
            const auto subset = draw_training_subset(pool, std::size_t(n), draw_seed);
            auto detector = make_detector(factory(n, subset, draw_seed), &manifest);

            std::vector<ImageEval> evals;
            for (const auto& rec : test) {
                const Box whole{0.0, 0.0, double(rec.size.width), double(rec.size.height)};
                auto raw = detector->detect({rec.id, rec.path, whole, nullptr});
                std::erase_if(raw, [&](const Detection& d) {
                    return d.score < cfg.proposal.score_threshold;
                });
                evals.push_back({nms(raw, cfg.proposal.nms_iou), rec.boxes()});
            }
            row.samples.push_back(average_precision(pr_curve(evals, cfg.match)));
        }
        const double k = double(row.samples.size());
        row.ap_mean = std::accumulate(row.samples.begin(), row.samples.end(), 0.0) / k;
        double ss = 0.0;
        for (double s : row.samples)
            ss += (s - row.ap_mean) * (s - row.ap_mean);
        row.ap_std = row.samples.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double r = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidArgument("spearman needs two equally sized samples of length >= 2");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = double(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace orchard
