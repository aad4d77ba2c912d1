#include "mvgeo/json_io.hpp"

#include "mvgeo/error.hpp"

namespace mvgeo {

void to_json(json& j, const GeoCoordinate& g)
{
    j = json{{"lat", g.lat_deg}, {"lng", g.lng_deg}};
}

void from_json(const json& j, GeoCoordinate& g)
{
    g = make_geo(j.at("lat").get<double>(), j.at("lng").get<double>());
}

json box_to_array(const BoundingBox& box)
{
    return json::array({box.x_min, box.y_min, box.x_max, box.y_max});
}

BoundingBox box_from_array(const json& j)
{
    if (!j.is_array() || j.size() != 4) {
        throw Error(ErrorCode::ParseError, "box must be an array [x_min, y_min, x_max, y_max]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const Detection& d)
{
    j = json{{"box", box_to_array(d.box)}, {"label", d.class_label}, {"score", d.score}, {"local_id", d.local_id}};
    if (d.feature) j["feature"] = *d.feature;
}

namespace {

json gt_box_to_json(const GroundTruthBox& gt)
{
    json j{{"x_min", gt.box.x_min}, {"y_min", gt.box.y_min}, {"x_max", gt.box.x_max},
           {"y_max", gt.box.y_max}, {"label", gt.class_label}};
    if (!gt.box_id.empty()) j["box_id"] = gt.box_id;
    if (!gt.author.empty()) j["author"] = gt.author;
    if (gt.instance_id) j["instance_id"] = *gt.instance_id;
    if (gt.geo) j["geo"] = *gt.geo;
    if (gt.distance_v) j["distance_m"] = *gt.distance_v;
    if (gt.heading_a) j["heading_deg"] = *gt.heading_a;
    return j;
}

GroundTruthBox gt_box_from_json(const json& j)
{
    GroundTruthBox gt;
    gt.box = {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
              j.at("y_max").get<double>()};
    gt.class_label = j.value("label", 0);
    gt.box_id = j.value("box_id", std::string{});
    gt.author = j.value("author", std::string{});
    if (j.contains("instance_id")) {
        const auto& id = j["instance_id"];
        gt.instance_id = id.is_string() ? id.get<std::string>() : id.dump();
    }
    if (j.contains("geo")) gt.geo = j["geo"].get<GeoCoordinate>();
    if (j.contains("distance_m")) gt.distance_v = j["distance_m"].get<double>();
    if (j.contains("heading_deg")) gt.heading_a = j["heading_deg"].get<double>();
    return gt;
}

}  // namespace

json image_record_to_json(const ImageRecord& record)
{
    json boxes = json::array();
    for (const auto& gt : record.ground_truth) boxes.push_back(gt_box_to_json(gt));
    return json{
        {"image_id", record.image_id},
        {"width", record.pano.width_px},
        {"height", record.pano.height_px},
        {"camera",
         {{"lat", record.camera.location.lat_deg},
          {"lng", record.camera.location.lng_deg},
          {"yaw_deg", record.camera.yaw_deg},
          {"height_m", record.camera.height_m}}},
        {"neighbors", record.neighbor_ids},
        {"boxes", std::move(boxes)},
    };
}

ImageRecord image_record_from_json(const json& j)
{
    ImageRecord record;
    record.image_id = j.at("image_id").get<std::string>();
    record.pano = {j.at("width").get<int>(), j.at("height").get<int>()};
    const auto& cam = j.at("camera");
    record.camera = make_camera(make_geo(cam.at("lat").get<double>(), cam.at("lng").get<double>()),
                                cam.at("yaw_deg").get<double>(), cam.at("height_m").get<double>());
    record.neighbor_ids = j.value("neighbors", std::vector<std::string>{});
    if (j.contains("boxes")) {
        for (const auto& b : j.at("boxes")) record.ground_truth.push_back(gt_box_from_json(b));
    }
    return record;
}

json identity_to_json(const Identity& identity)
{
    json apps = json::array();
    for (const auto& ref : identity.appearances) {
        apps.push_back({{"image_id", ref.image_id}, {"box_index", ref.box_index}});
    }
    json j{{"instance_id", identity.instance_id}, {"geo", identity.geo}, {"appearances", std::move(apps)}};
    if (identity.altitude_m) j["altitude_m"] = *identity.altitude_m;
    if (identity.status) j["status"] = *identity.status;
    return j;
}

Identity identity_from_json(const json& j)
{
    Identity identity;
    const auto& id = j.at("instance_id");
    identity.instance_id = id.is_string() ? id.get<std::string>() : id.dump();
    identity.geo = j.at("geo").get<GeoCoordinate>();
    for (const auto& a : j.at("appearances")) {
        identity.appearances.push_back({a.at("image_id").get<std::string>(), a.at("box_index").get<std::size_t>()});
    }
    if (j.contains("altitude_m")) identity.altitude_m = j["altitude_m"].get<double>();
    if (j.contains("status")) identity.status = j["status"].get<std::string>();
    return identity;
}

std::string dump_stable(const json& j, int indent)
{
    return j.dump(indent) + "\n";
}

}  // namespace mvgeo
