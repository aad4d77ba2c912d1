#include "doctest.h"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"
#include "mvgeo/localization.hpp"
#include "mvgeo/pipeline_io.hpp"
#include "mvgeo/simulator.hpp"

using namespace mvgeo;

TEST_SUITE("pipeline_io")
{
    TEST_CASE("matches and objects survive a JSON round trip")
    {
        SimConfig c;
        c.n_objects = 10;
        c.street_length_m = 60.0;
        c.yaw_noise_deg = 1.0;
        c.clutter_rate = 1.0;
        const SimScene s = generate_scene(c);
        const PipelineOutput out = localize_pipeline(s.dataset, s.detections, {});

        const nlohmann::json mj = matches_to_json(out.matches);
        const auto matches = matches_from_json(mj);
        CHECK(dump_stable(matches_to_json(matches)) == dump_stable(mj));

        const nlohmann::json oj = objects_to_json(out.objects);
        const auto objects = objects_from_json(oj);
        CHECK(dump_stable(objects_to_json(objects)) == dump_stable(oj));

        // tracks rebuilt from the serialized matches are the same tracks
        const auto again = localize_tracks(s.dataset, s.detections, matches, {});
        CHECK(dump_stable(objects_to_json(again)) == dump_stable(oj));
    }

    TEST_CASE("objects csv")
    {
        LocalizedObject o;
        o.track_id = 3;
        o.geo = make_geo(34.5, -118.25);
        o.n_views = 2;
        o.method = LocalizationMethod::Triangulated;
        o.members = {{"a", 1}, {"b", 2}};
        LocalizedObject failed;
        failed.track_id = 4;
        failed.error = "DegenerateBearings";
        const std::string csv = objects_to_csv({o, failed});
        CHECK(csv.find("track_id") == 0);
        CHECK(csv.find("triangulated") != std::string::npos);
        CHECK(csv.find("failed") != std::string::npos);
    }

    TEST_CASE("malformed documents are parse errors")
    {
        CHECK_THROWS_AS(matches_from_json(nlohmann::json::parse(R"({"matches":[{"x_image":"a"}]})")), Error);
        CHECK_THROWS_AS(objects_from_json(nlohmann::json::parse(R"([1,2])")), Error);
    }

    TEST_CASE("report serializations")
    {
        EvalReport r;
        r.reid = ReidEval{0.75, 3, 4};
        r.mae = MaeEval{1.5, 2, 2, 1.0, 1.0};
        const nlohmann::json j = report_to_json(r);
        CHECK(j.at("reid").at("accuracy") == 0.75);
        CHECK(j.at("mae").at("mae_m") == 1.5);
        CHECK_FALSE(j.contains("detection"));
        CHECK(report_to_csv(r).find("reid_accuracy") != std::string::npos);
    }
}
