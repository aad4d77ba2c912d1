#include "mvgeo/pipeline_io.hpp"

#include <cstdio>
#include <sstream>

#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"

namespace mvgeo {

namespace {

template <typename F>
auto parsing(const char* what, F&& f)
{
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string(what) + ": " + e.what());
    }
}

LocalizationMethod method_from_string(const std::string& s)
{
    if (s == "triangulated") return LocalizationMethod::Triangulated;
    if (s == "single_view") return LocalizationMethod::SingleView;
    if (s == "failed") return LocalizationMethod::Failed;
    throw Error(ErrorCode::ParseError, "unknown localization method '" + s + "'");
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

json matches_to_json(const std::vector<ImagePairMatch>& matches)
{
    json arr = json::array();
    for (const auto& m : matches) {
        json pairs = json::array();
        for (const auto& p : m.result.pairs) {
            pairs.push_back({{"x", p.det_x_local_id},
                             {"y", p.det_y_local_id},
                             {"projected_iou", p.projected_iou},
                             {"feature_dist", p.feature_dist},
                             {"cost", p.cost}});
        }
        arr.push_back({{"x_image", m.x_image},
                       {"y_image", m.y_image},
                       {"pairs", std::move(pairs)},
                       {"unmatched_x", m.result.unmatched_x},
                       {"unmatched_y", m.result.unmatched_y}});
    }
    return json{{"matches", std::move(arr)}};
}

std::vector<ImagePairMatch> matches_from_json(const json& j)
{
    return parsing("matches", [&] {
        std::vector<ImagePairMatch> out;
        for (const auto& m : j.at("matches")) {
            ImagePairMatch pm;
            pm.x_image = m.at("x_image").get<std::string>();
            pm.y_image = m.at("y_image").get<std::string>();
            for (const auto& p : m.at("pairs")) {
                pm.result.pairs.push_back({p.at("x").get<int>(), p.at("y").get<int>(), p.value("projected_iou", 0.0),
                                           p.value("feature_dist", 0.0), p.value("cost", 0.0)});
            }
            pm.result.unmatched_x = m.value("unmatched_x", std::vector<int>{});
            pm.result.unmatched_y = m.value("unmatched_y", std::vector<int>{});
            out.push_back(std::move(pm));
        }
        return out;
    });
}

json objects_to_json(const std::vector<LocalizedObject>& objects)
{
    json arr = json::array();
    for (const auto& o : objects) {
        json members = json::array();
        for (const auto& m : o.members) members.push_back({{"image_id", m.image_id}, {"local_id", m.local_id}});
        json j{{"track_id", o.track_id},
               {"n_views", o.n_views},
               {"residual_m", o.residual_m},
               {"method", to_string(o.method)},
               {"fallback", o.fallback},
               {"members", std::move(members)}};
        if (o.geo) j["geo"] = *o.geo;
        if (!o.error.empty()) j["error"] = o.error;
        arr.push_back(std::move(j));
    }
    return json{{"objects", std::move(arr)}};
}

std::vector<LocalizedObject> objects_from_json(const json& j)
{
    return parsing("objects", [&] {
        std::vector<LocalizedObject> out;
        for (const auto& o : j.at("objects")) {
            LocalizedObject obj;
            obj.track_id = o.at("track_id").get<std::size_t>();
            obj.n_views = o.value("n_views", std::size_t{0});
            obj.residual_m = o.value("residual_m", 0.0);
            obj.method = method_from_string(o.value("method", std::string("failed")));
            obj.fallback = o.value("fallback", false);
            for (const auto& m : o.value("members", json::array())) {
                obj.members.push_back({m.at("image_id").get<std::string>(), m.at("local_id").get<int>()});
            }
            if (o.contains("geo")) obj.geo = o["geo"].get<GeoCoordinate>();
            obj.error = o.value("error", std::string{});
            out.push_back(std::move(obj));
        }
        return out;
    });
}

std::string objects_to_csv(const std::vector<LocalizedObject>& objects)
{
    std::ostringstream os;
    os << "track_id,lat,lng,n_views,method,fallback,residual_m\n";
    for (const auto& o : objects) {
        os << o.track_id << ',' << (o.geo ? fmt(o.geo->lat_deg) : "") << ',' << (o.geo ? fmt(o.geo->lng_deg) : "")
           << ',' << o.n_views << ',' << to_string(o.method) << ',' << (o.fallback ? 1 : 0) << ','
           << fmt(o.residual_m) << '\n';
    }
    return os.str();
}

json report_to_json(const EvalReport& report)
{
    json j = json::object();
    if (report.detection) {
        json classes = json::array();
        for (const auto& c : report.detection->per_class) {
            classes.push_back({{"class", c.class_label}, {"ap", c.ap}, {"n_gt", c.n_gt}, {"tp", c.tp}, {"fp", c.fp}});
        }
        j["detection"] = {{"map", report.detection->map},
                          {"tp", report.detection->tp},
                          {"fp", report.detection->fp},
                          {"fn", report.detection->fn},
                          {"per_class", std::move(classes)}};
    }
    if (report.reid) {
        j["reid"] = {{"accuracy", report.reid->accuracy},
                     {"correct", report.reid->correct},
                     {"co_visible", report.reid->co_visible}};
    }
    if (report.mae) {
        j["mae"] = {{"mae_m", report.mae->mae_m},
                    {"matched", report.mae->matched},
                    {"predictions", report.mae->predictions},
                    {"coverage", report.mae->coverage},
                    {"gt_coverage", report.mae->gt_coverage}};
    }
    return j;
}

std::string report_to_csv(const EvalReport& report)
{
    std::ostringstream os;
    os << "metric,value\n";
    if (report.detection) {
        os << "det_map," << fmt(report.detection->map) << '\n';
        os << "det_tp," << report.detection->tp << "\ndet_fp," << report.detection->fp << "\ndet_fn,"
           << report.detection->fn << '\n';
    }
    if (report.reid) {
        os << "reid_accuracy," << fmt(report.reid->accuracy) << '\n';
        os << "reid_correct," << report.reid->correct << "\nreid_co_visible," << report.reid->co_visible << '\n';
    }
    if (report.mae) {
        os << "mae_m," << fmt(report.mae->mae_m) << '\n';
        os << "mae_coverage," << fmt(report.mae->coverage) << "\nmae_gt_coverage," << fmt(report.mae->gt_coverage)
           << '\n';
    }
    return os.str();
}

}  // namespace mvgeo
