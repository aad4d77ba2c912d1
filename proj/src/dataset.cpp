#include "mvgeo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"

namespace fs = std::filesystem;

namespace mvgeo {

std::string_view to_string(Split split) noexcept
{
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: break;
    }
    return "unassigned";
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out << content;
        if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

namespace {

json parse_json_text(const std::string& text, const std::string& where)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
}

json parse_json_file(const fs::path& path)
{
    return parse_json_text(read_text_file(path), path.string());
}

// Runs a conversion and rewraps schema errors with the source location.
template <typename F>
auto with_location(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MissingProperty || e.code() == ErrorCode::FeatureDimMismatch) throw;
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
}

void add_violation(ValidationReport& report, std::string kind, std::string message)
{
    report.violations.push_back({std::move(kind), std::move(message)});
}

}  // namespace

ValidationReport validate(const SceneDataset& dataset, const ValidationOptions& options)
{
    ValidationReport report;
    for (const auto& [key, record] : dataset.images) {
        const std::string where = "image '" + key + "'";
        if (key != record.image_id) {
            add_violation(report, "image_key_mismatch", where + " stored under a different id '" + record.image_id + "'");
        }
        if (record.pano.width_px <= 0 || record.pano.height_px <= 0) {
            add_violation(report, "image_size", where + " has non-positive dimensions");
        } else if (!record.pano.is_equirectangular()) {
            report.warnings.push_back(where + " is not a 2:1 equirectangular frame");
        }
        if (!(record.camera.height_m > 0.0)) {
            add_violation(report, "camera_height", where + " camera height must be positive");
        }
        if (!(record.camera.yaw_deg >= 0.0 && record.camera.yaw_deg < 360.0)) {
            add_violation(report, "camera_yaw", where + " camera yaw outside [0, 360)");
        }
        for (const auto& n : record.neighbor_ids) {
            if (!dataset.images.contains(n)) report.warnings.push_back(where + " neighbor '" + n + "' not in dataset");
        }
        std::set<std::string> box_ids;
        for (std::size_t i = 0; i < record.ground_truth.size(); ++i) {
            const auto& gt = record.ground_truth[i];
            const std::string bwhere = where + " box " + std::to_string(i);
            if (!gt.box.well_ordered()) {
                add_violation(report, "box_order", bwhere + " has min >= max");
            } else if (record.pano.width_px > 0 && !box_within_image(gt.box, record.pano)) {
                add_violation(report, "box_bounds", bwhere + " lies outside the image");
            }
            if (gt.instance_id && !gt.geo) {
                add_violation(report, "identity_without_geo", bwhere + " has an instance id but no geo");
            }
            if (gt.instance_id && !dataset.identities.contains(*gt.instance_id)) {
                add_violation(report, "unregistered_instance", bwhere + " references unknown identity '" + *gt.instance_id + "'");
            }
            if (gt.distance_v && *gt.distance_v < 0.0) {
                add_violation(report, "negative_distance", bwhere + " has a negative distance");
            }
            if (!gt.box_id.empty() && !box_ids.insert(gt.box_id).second) {
                add_violation(report, "duplicate_box_id", bwhere + " repeats box id '" + gt.box_id + "'");
            }
        }
    }
    for (const auto& [key, identity] : dataset.identities) {
        const std::string where = "identity '" + key + "'";
        if (key != identity.instance_id) {
            add_violation(report, "identity_key_mismatch", where + " stored under a different id");
        }
        if (identity.appearances.empty()) {
            add_violation(report, "identity_without_appearance", where + " has no appearances");
        }
        if (options.max_appearances && identity.appearances.size() > *options.max_appearances) {
            add_violation(report, "too_many_appearances",
                          where + " appears " + std::to_string(identity.appearances.size()) + " times");
        }
        for (const auto& ref : identity.appearances) {
            const auto it = dataset.images.find(ref.image_id);
            if (it == dataset.images.end() || ref.box_index >= it->second.ground_truth.size()) {
                add_violation(report, "dangling_reference",
                              where + " references missing box " + ref.image_id + "#" + std::to_string(ref.box_index));
                continue;
            }
            const auto& gt = it->second.ground_truth[ref.box_index];
            if (gt.instance_id && *gt.instance_id != identity.instance_id) {
                add_violation(report, "identity_mismatch",
                              where + " references a box labeled '" + *gt.instance_id + "'");
            }
        }
    }
    for (const auto& [image_id, split] : dataset.splits) {
        if (!dataset.images.contains(image_id)) {
            add_violation(report, "dangling_split", "split entry '" + image_id + "' not in dataset");
        }
    }
    return report;
}

namespace {

std::map<InstanceId, Identity> identities_from_boxes(const SceneDataset& dataset)
{
    std::map<InstanceId, Identity> out;
    for (const auto& [image_id, record] : dataset.images) {
        for (std::size_t i = 0; i < record.ground_truth.size(); ++i) {
            const auto& gt = record.ground_truth[i];
            if (!gt.instance_id || !gt.geo) continue;
            auto [it, inserted] = out.try_emplace(*gt.instance_id);
            if (inserted) {
                it->second.instance_id = *gt.instance_id;
                it->second.geo = *gt.geo;
            }
            it->second.appearances.push_back({image_id, i});
        }
    }
    return out;
}

std::string summarize(const ValidationReport& report)
{
    std::ostringstream os;
    os << report.violations.size() << " violation(s)";
    const std::size_t shown = std::min<std::size_t>(report.violations.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) os << "; " << report.violations[i].message;
    return os.str();
}

}  // namespace

SceneDataset load_pasadena(const fs::path& root, const ValidationOptions& options)
{
    const fs::path ann_dir = root / "annotations";
    if (!fs::is_directory(root) || !fs::is_directory(ann_dir)) {
        throw Error(ErrorCode::ParseError, root.string() + ": missing annotations/ directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(ann_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (files.empty()) throw Error(ErrorCode::ParseError, ann_dir.string() + ": no annotation records");
    std::sort(files.begin(), files.end());

    SceneDataset dataset;
    for (const auto& file : files) {
        const json j = parse_json_file(file);
        ImageRecord record = with_location(file.string(), [&] { return image_record_from_json(j); });
        if (record.image_id != file.stem().string()) {
            throw Error(ErrorCode::ParseError,
                        file.string() + ": image_id '" + record.image_id + "' does not match the file name");
        }
        dataset.images.emplace(record.image_id, std::move(record));
    }

    const fs::path ident_file = root / "identities.json";
    if (fs::exists(ident_file)) {
        const json j = parse_json_file(ident_file);
        with_location(ident_file.string(), [&] {
            for (const auto& item : j) {
                Identity identity = identity_from_json(item);
                const std::string key = identity.instance_id;
                if (!dataset.identities.emplace(key, std::move(identity)).second) {
                    throw Error(ErrorCode::ParseError, "duplicate identity '" + key + "'");
                }
            }
            return 0;
        });
    } else {
        dataset.identities = identities_from_boxes(dataset);
    }

    const fs::path split_file = root / "splits.json";
    if (fs::exists(split_file)) {
        const json j = parse_json_file(split_file);
        with_location(split_file.string(), [&] {
            const std::pair<const char*, Split> names[] = {{"train", Split::Train}, {"val", Split::Val}, {"test", Split::Test}};
            for (const auto& [name, split] : names) {
                if (!j.contains(name)) continue;
                for (const auto& id : j.at(name)) dataset.splits[id.get<std::string>()] = split;
            }
            return 0;
        });
    }

    const ValidationReport report = validate(dataset, options);
    if (!report.ok()) throw Error(ErrorCode::IntegrityError, root.string() + ": " + summarize(report));
    return dataset;
}

std::map<std::string, std::string> pasadena_files(const SceneDataset& dataset)
{
    std::map<std::string, std::string> files;
    for (const auto& [id, record] : dataset.images) {
        files["annotations/" + id + ".json"] = dump_stable(image_record_to_json(record));
    }
    json identities = json::array();
    for (const auto& [id, identity] : dataset.identities) identities.push_back(identity_to_json(identity));
    files["identities.json"] = dump_stable(identities);

    json splits{{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
    for (const auto& [id, split] : dataset.splits) {
        if (split != Split::Unassigned) splits[std::string(to_string(split))].push_back(id);
    }
    files["splits.json"] = dump_stable(splits);
    return files;
}

void save_pasadena(const SceneDataset& dataset, const fs::path& root)
{
    fs::create_directories(root / "annotations");
    for (const auto& [rel, content] : pasadena_files(dataset)) write_text_file(root / rel, content);
}

namespace {

const json& require(const json& props, const char* name, std::size_t feature_index)
{
    if (!props.contains(name) || props.at(name).is_null()) {
        throw Error(ErrorCode::MissingProperty,
                    "feature " + std::to_string(feature_index) + ": missing property '" + name + "'");
    }
    return props.at(name);
}

BoundingBox polygon_hull(const json& polygon)
{
    if (!polygon.is_array() || polygon.empty()) throw Error(ErrorCode::ParseError, "empty polygon");
    BoundingBox box{1e300, 1e300, -1e300, -1e300};
    for (const auto& p : polygon) {
        const double x = p.at(0).get<double>();
        const double y = p.at(1).get<double>();
        box.x_min = std::min(box.x_min, x);
        box.y_min = std::min(box.y_min, y);
        box.x_max = std::max(box.x_max, x);
        box.y_max = std::max(box.y_max, y);
    }
    return box;
}

}  // namespace

SceneDataset parse_mapillary_geojson(const std::string& text, const MapillaryOptions& options)
{
    const json doc = parse_json_text(text, "geojson");
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
        throw Error(ErrorCode::ParseError, "geojson: not a FeatureCollection");
    }
    SceneDataset dataset;
    std::map<std::string, std::set<std::string>> neighbors;
    const auto& features = doc.at("features");
    for (std::size_t f = 0; f < features.size(); ++f) {
        const std::string where = "feature " + std::to_string(f);
        const auto& feature = features[f];
        with_location(where, [&] {
            const auto& geometry = feature.at("geometry");
            if (geometry.value("type", "") != "Point") throw Error(ErrorCode::ParseError, "geometry must be a Point");
            const auto& coords = geometry.at("coordinates");
            const GeoCoordinate geo = make_geo(coords.at(1).get<double>(), coords.at(0).get<double>());
            const json& props = feature.contains("properties") ? feature.at("properties") : json::object();

            const auto& keys = require(props, "image_keys", f);
            const auto& locations = require(props, "image_locations", f);
            const auto& polygons = require(props, "polygons", f);
            if (keys.empty()) throw Error(ErrorCode::MissingProperty, where + ": empty 'image_keys'");
            if (polygons.size() != keys.size()) throw Error(ErrorCode::ParseError, "'polygons' length differs from 'image_keys'");

            Identity identity;
            if (props.contains("key")) {
                const auto& k = props["key"];
                identity.instance_id = k.is_string() ? k.get<std::string>() : k.dump();
            } else {
                identity.instance_id = "feature-" + std::to_string(f);
            }
            identity.geo = geo;
            if (props.contains("altitude")) identity.altitude_m = props["altitude"].get<double>();

            for (std::size_t k = 0; k < keys.size(); ++k) {
                const std::string image_id = keys[k].get<std::string>();
                const json& loc = locations.is_object() ? locations.at(image_id) : locations.at(k);
                auto [it, inserted] = dataset.images.try_emplace(image_id);
                ImageRecord& record = it->second;
                if (inserted) {
                    record.image_id = image_id;
                    record.pano = options.default_geometry;
                    if (props.contains("image_sizes")) {
                        const auto& sz = props["image_sizes"].at(k);
                        record.pano = {sz.at(0).get<int>(), sz.at(1).get<int>()};
                    }
                    const double yaw = props.contains("image_yaws") ? props["image_yaws"].at(k).get<double>() : 0.0;
                    record.camera = make_camera(make_geo(loc.at(1).get<double>(), loc.at(0).get<double>()), yaw,
                                                options.camera_height_m);
                    dataset.splits[image_id] = options.split;
                }
                GroundTruthBox gt;
                gt.box = polygon_hull(polygons.at(k));
                gt.instance_id = identity.instance_id;
                gt.geo = geo;
                if (props.contains("distances")) {
                    gt.distance_v = props["distances"].at(k).get<double>();
                } else if (props.contains("distance")) {
                    gt.distance_v = props["distance"].get<double>();
                }
                gt.heading_a = heading_from_column(gt.box.footpoint().x, record.pano);
                identity.appearances.push_back({image_id, record.ground_truth.size()});
                record.ground_truth.push_back(std::move(gt));
                for (std::size_t o = 0; o < keys.size(); ++o) {
                    if (o != k) neighbors[image_id].insert(keys[o].get<std::string>());
                }
            }
            const std::string key = identity.instance_id;
            if (!dataset.identities.emplace(key, std::move(identity)).second) {
                throw Error(ErrorCode::ParseError, "duplicate identity key '" + key + "'");
            }
            return 0;
        });
    }
    for (auto& [id, record] : dataset.images) {
        const auto& n = neighbors[id];
        record.neighbor_ids.assign(n.begin(), n.end());
    }
    if (std::all_of(dataset.splits.begin(), dataset.splits.end(),
                    [](const auto& kv) { return kv.second == Split::Unassigned; })) {
        dataset.splits.clear();
    }
    return dataset;
}

SceneDataset load_mapillary_geojson(const fs::path& path, const MapillaryOptions& options)
{
    try {
        return parse_mapillary_geojson(read_text_file(path), options);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
        throw;
    }
}

DetectionMap parse_detections(const std::string& text, std::optional<std::size_t> feature_dim)
{
    const json doc = parse_json_text(text, "detections");
    if (!doc.is_object()) throw Error(ErrorCode::ParseError, "detections: top level must be an object keyed by image id");
    DetectionMap out;
    for (const auto& [image_id, list] : doc.items()) {
        auto& dets = out[image_id];
        std::set<int> used;
        std::vector<bool> has_id;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "detections[" + image_id + "][" + std::to_string(i) + "]";
            const auto& item = list[i];
            Detection det = with_location(where, [&] {
                Detection d;
                d.box = box_from_array(item.at("box"));
                d.class_label = item.value("label", 0);
                d.score = item.at("score").get<double>();
                if (!(d.score >= 0.0 && d.score <= 1.0)) {
                    throw Error(ErrorCode::ParseError, "score outside [0, 1]");
                }
                if (item.contains("feature") && !item["feature"].is_null()) {
                    d.feature = item["feature"].get<FeatureVector>();
                    if (!feature_dim) feature_dim = d.feature->size();
                    if (d.feature->size() != *feature_dim) {
                        throw Error(ErrorCode::FeatureDimMismatch,
                                    where + ": feature length " + std::to_string(d.feature->size()) +
                                        " != " + std::to_string(*feature_dim));
                    }
                }
                if (item.contains("local_id")) {
                    d.local_id = item["local_id"].get<int>();
                    if (!used.insert(d.local_id).second) throw Error(ErrorCode::ParseError, "duplicate local_id");
                }
                return d;
            });
            has_id.push_back(item.contains("local_id"));
            dets.push_back(std::move(det));
        }
        int next = 0;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (has_id[i]) continue;
            while (used.contains(next)) ++next;
            dets[i].local_id = next;
            used.insert(next);
        }
    }
    return out;
}

DetectionMap load_detections(const fs::path& path, std::optional<std::size_t> feature_dim)
{
    return parse_detections(read_text_file(path), feature_dim);
}

std::string detections_to_json(const DetectionMap& detections)
{
    json doc = json::object();
    for (const auto& [image_id, dets] : detections) {
        json list = json::array();
        for (const auto& d : dets) list.push_back(d);
        doc[image_id] = std::move(list);
    }
    return dump_stable(doc);
}

}  // namespace mvgeo
