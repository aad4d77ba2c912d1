#include <set>

#include "doctest.h"
#include "mvgeo/dataset.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"
#include "support.hpp"

using namespace mvgeo;
using json = nlohmann::json;

namespace {

json image_json(const std::string& id, double lat, std::vector<json> boxes)
{
    return {{"image_id", id},
            {"width", 2048},
            {"height", 1024},
            {"camera", {{"lat", lat}, {"lng", -118.0}, {"yaw_deg", 0.0}, {"height_m", 2.5}}},
            {"neighbors", json::array()},
            {"boxes", boxes}};
}

json box_json(double x0, std::optional<std::string> instance = std::nullopt)
{
    json b{{"x_min", x0}, {"y_min", 500.0}, {"x_max", x0 + 40.0}, {"y_max", 620.0}, {"label", 0}};
    if (instance) {
        b["instance_id"] = *instance;
        b["geo"] = {{"lat", 34.0001}, {"lng", -118.0001}};
    }
    return b;
}

// Two panoramas, one tree in both, one anonymous box.
void write_fixture(const std::filesystem::path& root)
{
    write_text_file(root / "annotations/p1.json",
                    image_json("p1", 34.0, {box_json(100, "tree-1"), box_json(400)}).dump());
    write_text_file(root / "annotations/p2.json", image_json("p2", 34.0002, {box_json(900, "tree-1")}).dump());
}

ImageRecord record(const std::string& id)
{
    ImageRecord r;
    r.image_id = id;
    r.camera = make_camera(make_geo(34.0, -118.0), 0.0, 2.5);
    return r;
}

}  // namespace

TEST_SUITE("data_model")
{
    TEST_CASE("hand-built fixture: one identity seen twice")
    {
        test::TempDir dir;
        write_fixture(dir.path());
        const SceneDataset ds = load_pasadena(dir.path());
        CHECK(ds.images.size() == 2);
        CHECK(ds.box_count() == 3);
        REQUIRE(ds.identities.size() == 1);
        const Identity& id = ds.identities.at("tree-1");
        REQUIRE(id.appearances.size() == 2);
        CHECK(id.appearances[0] == BoxRef{"p1", 0});
        CHECK(id.appearances[1] == BoxRef{"p2", 0});
        CHECK(validate(ds).ok());
    }

    TEST_CASE("empty directory is a parse error")
    {
        test::TempDir dir;
        try {
            load_pasadena(dir.path());
            FAIL("expected ParseError");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ParseError);
        }
        std::filesystem::create_directories(dir / "annotations");
        CHECK_THROWS_AS(load_pasadena(dir.path()), Error);
    }

    TEST_CASE("malformed record names the file")
    {
        test::TempDir dir;
        write_fixture(dir.path());
        write_text_file(dir / "annotations/p3.json", "{ not json");
        try {
            load_pasadena(dir.path());
            FAIL("expected ParseError");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ParseError);
            CHECK(std::string(e.what()).find("p3.json") != std::string::npos);
        }
    }

    TEST_CASE("save and load round trip")
    {
        test::TempDir a, b;
        write_fixture(a.path());
        const SceneDataset ds = load_pasadena(a.path());
        save_pasadena(ds, b.path());
        const SceneDataset back = load_pasadena(b.path());
        CHECK(pasadena_files(back) == pasadena_files(ds));
    }

    TEST_CASE("validation flags dangling identities and inverted boxes")
    {
        SceneDataset ds;
        ds.images["p1"] = record("p1");
        Identity ghost;
        ghost.instance_id = "ghost";
        ghost.geo = make_geo(34.0, -118.0);
        ghost.appearances = {{"missing", 0}};
        ds.identities["ghost"] = ghost;
        ValidationReport r = validate(ds);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].kind == "dangling_reference");

        SceneDataset inverted;
        inverted.images["p1"] = record("p1");
        GroundTruthBox bad;
        bad.box = {50, 500, 40, 600};
        inverted.images["p1"].ground_truth.push_back(bad);
        r = validate(inverted);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].kind == "box_order");
    }

    TEST_CASE("appearance bound is optional")
    {
        test::TempDir dir;
        write_fixture(dir.path());
        const SceneDataset ds = load_pasadena(dir.path());
        CHECK(validate(ds, {1}).violations.size() == 1);
        CHECK(validate(ds, {4}).ok());
        CHECK_THROWS_AS(load_pasadena(dir.path(), {1}), Error);
    }

    TEST_CASE("seam-crossing boxes are within the image")
    {
        const PanoramaGeometry pano{2048, 1024};
        CHECK(box_within_image({2000, 500, 2100, 600}, pano));
        CHECK_FALSE(box_within_image({-10, 500, 20, 600}, pano));
        CHECK_FALSE(box_within_image({10, 500, 20, 1100}, pano));
    }

    TEST_CASE("detections: sizes, features and score range")
    {
        const std::string text = R"({
            "a": [{"box":[0,0,10,10],"label":0,"score":0.5},
                  {"box":[5,0,15,10],"label":0,"score":0.6,"local_id":7},
                  {"box":[20,0,30,10],"label":1,"score":0.7}],
            "b": [{"box":[0,0,10,10],"label":0,"score":0.5,"feature":[1,2]},
                  {"box":[0,0,10,10],"label":0,"score":0.4,"feature":[3,4]}]})";
        const DetectionMap m = parse_detections(text);
        CHECK(m.at("a").size() == 3);
        CHECK(m.at("b").size() == 2);
        CHECK_FALSE(m.at("a")[0].feature.has_value());
        REQUIRE(m.at("b")[1].feature.has_value());
        CHECK(*m.at("b")[1].feature == std::vector<double>{3, 4});
        // filled ids skip the explicit one
        std::set<int> ids;
        for (const auto& d : m.at("a")) ids.insert(d.local_id);
        CHECK(ids.size() == 3);
        CHECK(ids.count(7) == 1);

        CHECK_THROWS_AS(parse_detections(R"({"a":[{"box":[0,0,1,1],"label":0,"score":1.2}]})"), Error);
        try {
            parse_detections(R"({"a":[{"box":[0,0,1,1],"label":0,"score":0.2,"feature":[1,2]}],
                                 "b":[{"box":[0,0,1,1],"label":0,"score":0.2,"feature":[1,2,3]}]})");
            FAIL("expected FeatureDimMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::FeatureDimMismatch);
        }
        CHECK(parse_detections(detections_to_json(m)) .at("b")[0].feature == m.at("b")[0].feature);
    }

    TEST_CASE("geojson: polygon hull and required keys")
    {
        const std::string text = R"({"type":"FeatureCollection","features":[{
            "type":"Feature","geometry":{"type":"Point","coordinates":[-118.0,34.0]},
            "properties":{"key":"sign-1","image_keys":["img-a"],
                          "image_locations":[[-118.0001,34.0]],
                          "polygons":[[[10,10],[20,10],[20,30],[10,30]]]}}]})";
        const SceneDataset ds = parse_mapillary_geojson(text);
        REQUIRE(ds.images.size() == 1);
        const auto& gt = ds.images.at("img-a").ground_truth;
        REQUIRE(gt.size() == 1);
        CHECK(gt[0].box == BoundingBox{10, 10, 20, 30});
        CHECK(gt[0].instance_id == std::optional<std::string>("sign-1"));
        CHECK(ds.identities.at("sign-1").appearances.size() == 1);

        const std::string missing = R"({"type":"FeatureCollection","features":[{
            "type":"Feature","geometry":{"type":"Point","coordinates":[-118.0,34.0]},
            "properties":{"key":"sign-1","polygons":[[[10,10],[20,10],[20,30]]]}}]})";
        try {
            parse_mapillary_geojson(missing);
            FAIL("expected MissingProperty");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingProperty);
        }
    }

    TEST_CASE("json helpers are stable")
    {
        CHECK(box_from_array(box_to_array({1, 2, 3, 4})) == BoundingBox{1, 2, 3, 4});
        CHECK_THROWS(box_from_array(json::array({1, 2, 3})));
        const json a = json::parse(R"({"b":1,"a":[0.1,2]})");
        CHECK(dump_stable(a) == dump_stable(json::parse(dump_stable(a))));
    }
}
