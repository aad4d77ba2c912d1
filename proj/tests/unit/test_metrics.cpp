#include <algorithm>
#include <random>

#include "doctest.h"
#include "mvgeo/error.hpp"
#include "mvgeo/metrics.hpp"

using namespace mvgeo;

namespace {

GroundTruthBox gt_box(BoundingBox b, int label = 0, std::optional<std::string> id = std::nullopt)
{
    GroundTruthBox g;
    g.box = b;
    g.class_label = label;
    g.instance_id = std::move(id);
    return g;
}

Detection pred(BoundingBox b, double score, int local_id, int label = 0)
{
    Detection d;
    d.box = b;
    d.score = score;
    d.local_id = local_id;
    d.class_label = label;
    return d;
}

ImageRecord image_with(const std::string& id, int n)
{
    ImageRecord r;
    r.image_id = id;
    r.camera = make_camera(make_geo(34.0, -118.0), 0.0, 2.5);
    for (int i = 0; i < n; ++i) {
        r.ground_truth.push_back(gt_box({100.0 * i, 500, 100.0 * i + 50, 600}, 0, "obj" + std::to_string(i)));
    }
    return r;
}

std::vector<Detection> dets_on(const ImageRecord& r)
{
    std::vector<Detection> out;
    for (std::size_t i = 0; i < r.ground_truth.size(); ++i) out.push_back(pred(r.ground_truth[i].box, 0.9, int(i)));
    return out;
}

}  // namespace

TEST_SUITE("metrics")
{
    const BoundingBox g{0, 0, 10, 10};

    TEST_CASE("one ground truth, one good detection")
    {
        const GroundTruthMap gts{{"a", {gt_box(g)}}};
        const DetectionMap preds{{"a", {pred({0, 0, 10, 9}, 0.7, 0)}}};
        const DetectionEval e = detection_map(preds, gts);
        CHECK(e.map == 1.0);
        CHECK(e.tp == 1);
        CHECK(e.fp == 0);
        CHECK(e.fn == 0);
    }

    TEST_CASE("false positive ranked above the true positive")
    {
        const GroundTruthMap gts{{"a", {gt_box(g)}}};
        // IoU 0.3 at score 0.9, IoU 0.9 at score 0.8
        const DetectionMap preds{{"a", {pred({0, 0, 3, 10}, 0.9, 0), pred({0, 0, 10, 9}, 0.8, 1)}}};
        const DetectionEval e = detection_map(preds, gts);
        CHECK(e.map == 0.5);
        REQUIRE(e.per_class.size() == 1);
        CHECK(e.per_class[0].tp == 1);
        CHECK(e.per_class[0].fp == 1);
    }

    TEST_CASE("no detections")
    {
        const GroundTruthMap gts{{"a", {gt_box(g)}}};
        const DetectionEval e = detection_map({}, gts);
        CHECK(e.map == 0.0);
        CHECK(e.fn == 1);
    }

    TEST_CASE("each ground truth is matched once")
    {
        const GroundTruthMap gts{{"a", {gt_box(g)}}};
        const DetectionMap preds{{"a", {pred(g, 0.9, 0), pred(g, 0.8, 1)}}};
        const DetectionEval e = detection_map(preds, gts);
        CHECK(e.tp == 1);
        CHECK(e.fp == 1);
        CHECK(e.map == 1.0);  // the duplicate comes after full recall
    }

    TEST_CASE("mAP averages classes with ground truth")
    {
        const GroundTruthMap gts{{"a", {gt_box(g, 0), gt_box({20, 0, 30, 10}, 1)}}};
        const DetectionMap preds{{"a", {pred(g, 0.9, 0, 0), pred({50, 50, 60, 60}, 0.9, 1, 1)}}};
        CHECK(detection_map(preds, gts).map == 0.5);
    }

    TEST_CASE("invariant to image order and score-preserving shuffles; monotone in the threshold")
    {
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> u(0, 200), s(0, 1);
        GroundTruthMap gts;
        DetectionMap preds;
        for (int img = 0; img < 6; ++img) {
            const std::string id = "img" + std::to_string(img);
            for (int k = 0; k < 5; ++k) {
                const double x = u(rng), y = u(rng);
                gts[id].push_back(gt_box({x, y, x + 30, y + 30}, k % 2));
                preds[id].push_back(pred({x + s(rng) * 12, y + s(rng) * 12, x + 30, y + 30}, s(rng), 2 * k, k % 2));
                preds[id].push_back(pred({u(rng), u(rng), 250, 250}, s(rng), 2 * k + 1, k % 2));
            }
        }
        const double ref = detection_map(preds, gts).map;
        DetectionMap renamed;
        GroundTruthMap renamed_gt;
        for (auto& [id, v] : preds) {
            std::shuffle(v.begin(), v.end(), rng);
            renamed["z" + id] = v;
            renamed_gt["z" + id] = gts.at(id);
        }
        CHECK(detection_map(preds, gts).map == ref);
        CHECK(detection_map(renamed, renamed_gt).map == ref);
        double last = 1.0;
        for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double m = detection_map(preds, gts, t).map;
            CHECK(m <= last);
            last = m;
        }
    }

    TEST_CASE("reid accuracy: all correct, half swapped, one-sided identities")
    {
        const ImageRecord x = image_with("x", 10);
        const ImageRecord y = image_with("y", 10);
        PairEvaluation pe{&x, &y, dets_on(x), dets_on(y), {}};
        for (int i = 0; i < 10; ++i) pe.result.pairs.push_back({i, i, 1.0, 0.0, 0.0});
        CHECK(reid_accuracy(std::vector<PairEvaluation>{pe}).accuracy == 1.0);

        // rotate the first five identities: obj0->obj1, ..., obj4->obj0
        for (int i = 0; i < 5; ++i) pe.result.pairs[i].det_y_local_id = (i + 1) % 5;
        const ReidEval half = reid_accuracy(std::vector<PairEvaluation>{pe});
        CHECK(half.accuracy == 0.5);
        CHECK(half.correct == 5);
        CHECK(half.co_visible == 10);

        // obj9 visible only in x: not counted
        ImageRecord y9 = image_with("y", 9);
        PairEvaluation one_sided{&x, &y9, dets_on(x), dets_on(y9), {}};
        for (int i = 0; i < 9; ++i) one_sided.result.pairs.push_back({i, i, 1.0, 0.0, 0.0});
        const ReidEval r = reid_accuracy(std::vector<PairEvaluation>{one_sided});
        CHECK(r.co_visible == 9);
        CHECK(r.accuracy == 1.0);
    }

    TEST_CASE("reid needs the detection to overlap its box")
    {
        const ImageRecord x = image_with("x", 1);
        const ImageRecord y = image_with("y", 1);
        std::vector<Detection> off{pred({20, 500, 70, 600}, 0.9, 0)};  // IoU 0.43
        PairEvaluation pe{&x, &y, off, dets_on(y), {}};
        pe.result.pairs.push_back({0, 0, 1.0, 0.0, 0.0});
        CHECK(reid_accuracy(std::vector<PairEvaluation>{pe}).accuracy == 0.0);
        CHECK(reid_accuracy(std::vector<PairEvaluation>{pe}, 0.4).accuracy == 1.0);
    }

    TEST_CASE("geo-localization MAE")
    {
        const GeoCoordinate o = make_geo(34.0, -118.0);
        const GeoCoordinate p = geo_from_enu(o, 100.0, 0.0);
        const std::vector<GeoCoordinate> truth{o, p};
        CHECK(geolocalization_mae(truth, truth).mae_m == 0.0);

        const std::vector<GeoCoordinate> preds{geo_from_enu(o, 2.0, 0.0), geo_from_enu(p, 0.0, 4.0)};
        const MaeEval e = geolocalization_mae(preds, truth);
        CHECK(e.mae_m == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(e.coverage == 1.0);

        const std::vector<GeoCoordinate> with_far{geo_from_enu(o, 2.0, 0.0), geo_from_enu(o, 50.0, 0.0)};
        const MaeEval g = geolocalization_mae(with_far, truth);
        CHECK(g.matched == 1);
        CHECK(g.coverage == 0.5);
        CHECK(g.gt_coverage == 0.5);
        CHECK(g.mae_m == doctest::Approx(2.0).epsilon(1e-9));
        CHECK_THROWS_AS(geolocalization_mae(std::vector<GeoCoordinate>{geo_from_enu(o, 0.0, 500.0)}, truth), Error);
    }

    TEST_CASE("report table mentions every section")
    {
        EvalReport r;
        r.reid = ReidEval{0.5, 5, 10};
        const std::string t = format_report_table(r);
        CHECK(t.find("Re-ID") != std::string::npos);
        CHECK(t.find("0.500") != std::string::npos);
    }
}
