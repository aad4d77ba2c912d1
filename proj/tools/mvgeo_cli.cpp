// mvgeo: command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 I/O or parse error,
// 3 validation error (bad dataset, unknown image, invalid config).

#include <algorithm>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvgeo/annotation.hpp"
#include "mvgeo/dataset.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"
#include "mvgeo/localization.hpp"
#include "mvgeo/matching.hpp"
#include "mvgeo/metrics.hpp"
#include "mvgeo/pipeline_io.hpp"
#include "mvgeo/simulator.hpp"
#include "mvgeo/version.hpp"

namespace fs = std::filesystem;
using namespace mvgeo;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::MissingProperty:
        return kExitIo;
    case ErrorCode::IntegrityError:
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidCoordinate:
    case ErrorCode::FeatureDimMismatch:
    case ErrorCode::IndexOutOfRange:
        return kExitValidation;
    default:
        return kExitFailure;
    }
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Content hash of a file, or of every regular file under a directory.
std::string content_hash(const fs::path& p)
{
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::uint64_t h = fnv1a("");
        for (const auto& f : files) {
            h = fnv1a(fs::relative(f, p).generic_string(), h);
            h = fnv1a(read_text_file(f), h);
        }
        return hex(h);
    }
    return hex(fnv1a(read_text_file(p)));
}

/// Options shared by every subcommand, plus the provenance record.
struct Run {
    std::string name;
    std::string out;
    std::string manifest;
    std::string format = "json";
    json config = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void emit(const std::string& content)
    {
        if (out.empty() || out == "-") {
            std::cout << content;
            std::cout.flush();
        } else {
            write_text_file(out, content);
            outputs.push_back(out);
        }
    }

    void write_manifest() const
    {
        fs::path target;
        if (!manifest.empty()) {
            target = manifest;
        } else if (!out.empty() && out != "-") {
            fs::path o(out);
            target = o.parent_path() / (o.filename().string() + ".manifest.json");
        } else {
            return;
        }
        json m{{"tool", "mvgeo"}, {"version", kVersion}, {"subcommand", name}, {"config", config}};
        m["config_hash"] = hex(fnv1a(config.dump()));
        json ins = json::array();
        for (const auto& i : inputs) {
            if (i.empty()) continue;
            ins.push_back({{"path", i}, {"hash", fs::exists(i) ? content_hash(i) : std::string("missing")}});
        }
        m["inputs"] = std::move(ins);
        json outs = json::array();
        for (const auto& o : outputs) outs.push_back({{"path", o}, {"hash", content_hash(o)}});
        m["outputs"] = std::move(outs);
        write_text_file(target, dump_stable(m));
    }
};

void add_common(CLI::App* cmd, Run& run, std::vector<std::string> formats)
{
    cmd->add_option("-o,--out", run.out, "Output path ('-' or empty for stdout)");
    cmd->add_option("--manifest", run.manifest, "Manifest path (default: <out>.manifest.json)");
    cmd->add_option("--format", run.format, "Output format")
        ->check(CLI::IsMember(formats))
        ->capture_default_str();
}

void add_data(CLI::App* cmd, std::string& data)
{
    cmd->add_option("-d,--data", data, "Dataset root (annotation layout)")->envname("MVGEO_DATA_ROOT");
}

void add_matching(CLI::App* cmd, MatchingConfig& m, unsigned& jobs, std::string& mode)
{
    cmd->add_option("--conf-threshold", m.conf_threshold, "Minimum detection score")->capture_default_str();
    cmd->add_option("--nms-iou", m.nms_iou, "NMS IoU threshold")->capture_default_str();
    cmd->add_option("--gate-iou", m.gate_iou, "Minimum projected IoU for a candidate pair")->capture_default_str();
    cmd->add_option("--feature-weight", m.feature_weight, "Weight of the appearance term")->capture_default_str();
    cmd->add_option("--mode", mode, "Assignment: optimal or greedy")
        ->check(CLI::IsMember({"optimal", "greedy"}))
        ->capture_default_str();
    cmd->add_flag("--filters", m.apply_filters, "Apply score threshold and NMS before matching");
    cmd->add_option("-j,--jobs", jobs, "Worker threads")->capture_default_str();
}

void resolve_mode(PipelineConfig& p, const std::string& mode)
{
    p.matching.assignment_mode = mode == "greedy" ? AssignmentMode::Greedy : AssignmentMode::Optimal;
    p.matching.validate();
}

json matching_json(const MatchingConfig& m, unsigned jobs)
{
    return {{"conf_threshold", m.conf_threshold},
            {"nms_iou", m.nms_iou},
            {"gate_iou", m.gate_iou},
            {"feature_weight", m.feature_weight},
            {"mode", m.assignment_mode == AssignmentMode::Optimal ? "optimal" : "greedy"},
            {"filters", m.apply_filters},
            {"jobs", jobs}};
}

SceneDataset load_data(const std::string& root)
{
    if (root.empty()) throw Error(ErrorCode::ConfigError, "no dataset: pass --data or set MVGEO_DATA_ROOT");
    return load_pasadena(root);
}

json parse_file(const std::string& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

std::string table_of(const std::vector<std::vector<std::string>>& rows)
{
    std::vector<std::size_t> w;
    for (const auto& r : rows) {
        w.resize(std::max(w.size(), r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
    }
    std::ostringstream os;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            os << r[i] << std::string(w[i] - r[i].size() + (i + 1 < r.size() ? 2 : 0), ' ');
        }
        os << '\n';
    }
    return os.str();
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---- project ----

struct ProjectArgs {
    std::string data, detections, x, y;
};

void cmd_project(const ProjectArgs& a, Run& run)
{
    const SceneDataset ds = load_data(a.data);
    const DetectionMap dets = load_detections(a.detections);
    run.inputs = {a.data, a.detections};
    run.config = {{"x", a.x}, {"y", a.y}, {"format", run.format}};
    for (const auto& id : {a.x, a.y}) {
        if (!ds.images.contains(id)) throw Error(ErrorCode::IntegrityError, "image '" + id + "' not in dataset");
    }
    const ImageRecord& rx = ds.images.at(a.x);
    const ImageRecord& ry = ds.images.at(a.y);

    auto direction = [&](const ImageRecord& src, const ImageRecord& dst) {
        json arr = json::array();
        const auto it = dets.find(src.image_id);
        if (it == dets.end()) return arr;
        for (const auto& d : it->second) {
            json j{{"local_id", d.local_id}, {"source_box", box_to_array(d.box)}};
            try {
                const ProjectedBox p = project_box(d.box, src.camera, dst.camera, src.pano, dst.pano);
                j["box"] = box_to_array(p.box);
                j["z_src_m"] = p.z_src;
                j["z_dst_m"] = p.z_dst;
            } catch (const Error& e) {
                j["box"] = nullptr;
                j["error"] = e.what();
            }
            arr.push_back(std::move(j));
        }
        return arr;
    };
    const json result{{"x_image", a.x}, {"y_image", a.y}, {"x_to_y", direction(rx, ry)}, {"y_to_x", direction(ry, rx)}};

    if (run.format == "json") {
        run.emit(dump_stable(result));
    } else {
        std::vector<std::vector<std::string>> rows{{"direction", "local_id", "x_min", "y_min", "x_max", "y_max"}};
        for (const char* dir : {"x_to_y", "y_to_x"}) {
            for (const auto& p : result[dir]) {
                std::vector<std::string> r{dir, std::to_string(p["local_id"].get<int>())};
                for (int k = 0; k < 4; ++k) r.push_back(p["box"].is_null() ? "" : num(p["box"][k].get<double>()));
                rows.push_back(std::move(r));
            }
        }
        if (run.format == "table") {
            run.emit(table_of(rows));
        } else {
            std::string csv;
            for (const auto& r : rows) {
                for (std::size_t i = 0; i < r.size(); ++i) csv += r[i] + (i + 1 < r.size() ? "," : "\n");
            }
            run.emit(csv);
        }
    }
}

// ---- match ----

struct MatchArgs {
    std::string data, detections;
    PipelineConfig pipeline;
    std::string mode = "optimal";
};

void cmd_match(const MatchArgs& a, Run& run)
{
    const SceneDataset ds = load_data(a.data);
    const DetectionMap dets = load_detections(a.detections);
    run.inputs = {a.data, a.detections};
    run.config = matching_json(a.pipeline.matching, a.pipeline.jobs);
    run.config.erase("jobs");  // results do not depend on it
    const auto matches = match_all_pairs(ds, dets, a.pipeline);
    if (run.format == "json") {
        run.emit(dump_stable(matches_to_json(matches)));
        return;
    }
    std::vector<std::vector<std::string>> rows{{"x_image", "y_image", "x_local_id", "y_local_id", "projected_iou", "feature_dist", "cost"}};
    for (const auto& m : matches) {
        for (const auto& p : m.result.pairs) {
            rows.push_back({m.x_image, m.y_image, std::to_string(p.det_x_local_id), std::to_string(p.det_y_local_id),
                            num(p.projected_iou), num(p.feature_dist), num(p.cost)});
        }
    }
    if (run.format == "table") {
        run.emit(table_of(rows));
    } else {
        std::string csv;
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) csv += r[i] + (i + 1 < r.size() ? "," : "\n");
        }
        run.emit(csv);
    }
}

// ---- localize ----

struct LocalizeArgs {
    std::string data, detections, matches;
    bool single = false;
    PipelineConfig pipeline;
    std::string mode = "optimal";
};

void cmd_localize(const LocalizeArgs& a, Run& run)
{
    const SceneDataset ds = load_data(a.data);
    const DetectionMap dets = load_detections(a.detections);
    run.inputs = {a.data, a.detections, a.matches};
    run.config = matching_json(a.pipeline.matching, a.pipeline.jobs);
    run.config.erase("jobs");
    run.config["single"] = a.single;

    std::vector<LocalizedObject> objects;
    if (a.single) {
        // every detection is its own track
        const auto geos = localize_all_single(ds, dets, a.pipeline.matching);
        std::size_t t = 0;
        for (const auto& g : geos) {
            LocalizedObject o;
            o.track_id = t++;
            o.geo = g;
            o.n_views = 1;
            o.method = LocalizationMethod::SingleView;
            o.fallback = true;
            objects.push_back(std::move(o));
        }
    } else {
        const auto matches = a.matches.empty() ? match_all_pairs(ds, dets, a.pipeline)
                                               : matches_from_json(parse_file(a.matches));
        objects = localize_tracks(ds, dets, matches, a.pipeline);
    }
    if (run.format == "json") {
        run.emit(dump_stable(objects_to_json(objects)));
    } else if (run.format == "csv") {
        run.emit(objects_to_csv(objects));
    } else {
        std::vector<std::vector<std::string>> rows{{"track", "lat", "lng", "views", "method", "residual_m"}};
        for (const auto& o : objects) {
            rows.push_back({std::to_string(o.track_id), o.geo ? num(o.geo->lat_deg) : "-",
                            o.geo ? num(o.geo->lng_deg) : "-", std::to_string(o.n_views),
                            std::string(to_string(o.method)), num(o.residual_m)});
        }
        run.emit(table_of(rows));
    }
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string data, detections, matches, objects;
    double iou_threshold = 0.5;
    double reid_iou = 0.5;
    double gate_m = kMaeGateM;
};

void cmd_evaluate(const EvaluateArgs& a, Run& run)
{
    if (a.detections.empty() && a.matches.empty() && a.objects.empty()) {
        throw Error(ErrorCode::ConfigError, "nothing to evaluate: pass --detections, --matches or --objects");
    }
    if (!a.matches.empty() && a.detections.empty()) {
        throw Error(ErrorCode::ConfigError, "--matches needs --detections to identify matched boxes");
    }
    const SceneDataset ds = load_data(a.data);
    run.inputs = {a.data, a.detections, a.matches, a.objects};
    run.config = {{"iou_threshold", a.iou_threshold}, {"reid_iou", a.reid_iou}, {"gate_m", a.gate_m}};

    EvalReport report;
    std::optional<DetectionMap> dets;
    if (!a.detections.empty()) {
        dets = load_detections(a.detections);
        report.detection = detection_map(*dets, ground_truth_of(ds), a.iou_threshold);
    }
    if (!a.matches.empty()) {
        const auto matches = matches_from_json(parse_file(a.matches));
        std::vector<PairEvaluation> pairs;
        for (const auto& m : matches) {
            PairEvaluation pe;
            pe.x = &ds.image(m.x_image);
            pe.y = &ds.image(m.y_image);
            if (const auto it = dets->find(m.x_image); it != dets->end()) pe.dets_x = it->second;
            if (const auto it = dets->find(m.y_image); it != dets->end()) pe.dets_y = it->second;
            pe.result = m.result;
            pairs.push_back(std::move(pe));
        }
        report.reid = reid_accuracy(pairs, a.reid_iou);
    }
    if (!a.objects.empty()) {
        std::vector<GeoCoordinate> preds;
        for (const auto& o : objects_from_json(parse_file(a.objects))) {
            if (o.geo) preds.push_back(*o.geo);
        }
        std::vector<GeoCoordinate> gt;
        for (const auto& [id, ident] : ds.identities) gt.push_back(ident.geo);
        report.mae = geolocalization_mae(preds, gt, a.gate_m);
    }
    if (run.format == "json") {
        run.emit(dump_stable(report_to_json(report)));
    } else if (run.format == "csv") {
        run.emit(report_to_csv(report));
    } else {
        run.emit(format_report_table(report));
    }
}

// ---- simulate ----

struct SimulateArgs {
    SimConfig sim;
    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::size_t seeds = 20;
    PipelineConfig pipeline;
    std::string mode = "optimal";
};

json sim_json(const SimConfig& c)
{
    return {{"seed", c.seed},
            {"objects", c.n_objects},
            {"street_length_m", c.street_length_m},
            {"camera_spacing_m", c.camera_spacing_m},
            {"lateral_min_m", c.lateral_offset_min_m},
            {"lateral_max_m", c.lateral_offset_max_m},
            {"camera_height_m", c.camera_height_m},
            {"object_height_m", c.object_height_m},
            {"object_width_m", c.object_width_m},
            {"yaw_noise_deg", c.yaw_noise_deg},
            {"position_noise_m", c.position_noise_m},
            {"bbox_jitter_px", c.bbox_jitter_px},
            {"terrain_noise_m", c.terrain_noise_m},
            {"dropout", c.detection_dropout_p},
            {"clutter_rate", c.clutter_rate},
            {"feature_dim", c.feature_dim},
            {"feature_noise", c.feature_noise},
            {"identical_features", c.identical_features},
            {"views_per_object", c.views_per_object},
            {"width", c.pano.width_px},
            {"height", c.pano.height_px}};
}

void cmd_simulate(const SimulateArgs& a, Run& run)
{
    run.config = sim_json(a.sim);
    if (!a.sweep_axis.empty()) {
        SweepSpec spec;
        spec.base = a.sim;
        spec.axis = sweep_axis_from_string(a.sweep_axis);
        spec.values = a.sweep_values;
        spec.seeds = a.seeds;
        if (spec.values.empty()) throw Error(ErrorCode::ConfigError, "--sweep needs --values");
        run.config["sweep"] = {{"axis", a.sweep_axis}, {"values", a.sweep_values}, {"seeds", a.seeds}};
        run.config["matching"] = matching_json(a.pipeline.matching, 1);
        const auto rows = sweep(spec, a.pipeline);
        if (run.format == "json") {
            json arr = json::array();
            for (const auto& r : rows) {
                arr.push_back({{"axis", to_string(r.axis)},
                               {"value", r.value},
                               {"seeds", r.seeds},
                               {"reid_accuracy", r.reid_accuracy},
                               {"mae_m", r.mae_m},
                               {"single_view_mae_m", r.single_view_mae_m},
                               {"detection_coverage", r.detection_coverage},
                               {"geo_coverage", r.geo_coverage}});
            }
            run.emit(dump_stable(arr));
        } else {
            run.emit(sweep_to_csv(rows));
        }
        return;
    }
    if (run.out.empty() || run.out == "-") throw Error(ErrorCode::ConfigError, "simulate needs --out DIR");
    const SimScene scene = generate_scene(a.sim);
    save_scene(scene, run.out);
    run.outputs.push_back(run.out);
    std::cerr << "wrote " << scene.dataset.images.size() << " panoramas, " << scene.object_geo.size()
              << " objects to " << run.out << "\n";
}

// ---- validate ----

struct ValidateArgs {
    std::string data, geojson;
    std::optional<std::size_t> max_appearances;
};

int cmd_validate(const ValidateArgs& a, Run& run)
{
    SceneDataset ds;
    ValidationOptions opts;
    opts.max_appearances = a.max_appearances;
    if (!a.geojson.empty()) {
        ds = load_mapillary_geojson(a.geojson);
        run.inputs = {a.geojson};
    } else {
        if (a.data.empty()) throw Error(ErrorCode::ConfigError, "pass --data or --geojson");
        // load without the integrity gate so every violation is reported
        try {
            ds = load_pasadena(a.data, opts);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::IntegrityError) throw;
            run.emit(std::string("invalid: ") + e.what() + "\n");
            return kExitValidation;
        }
        run.inputs = {a.data};
    }
    const ValidationReport report = validate(ds, opts);
    if (run.format == "json") {
        json v = json::array();
        for (const auto& x : report.violations) v.push_back({{"kind", x.kind}, {"message", x.message}});
        run.emit(dump_stable({{"ok", report.ok()},
                              {"images", ds.images.size()},
                              {"identities", ds.identities.size()},
                              {"boxes", ds.box_count()},
                              {"violations", v},
                              {"warnings", report.warnings}}));
    } else {
        std::ostringstream os;
        os << (report.ok() ? "ok" : "invalid") << ": " << ds.images.size() << " images, " << ds.identities.size()
           << " identities, " << ds.box_count() << " boxes\n";
        for (const auto& x : report.violations) os << "violation " << x.kind << ": " << x.message << "\n";
        for (const auto& w : report.warnings) os << "warning: " << w << "\n";
        run.emit(os.str());
    }
    return report.ok() ? 0 : kExitValidation;
}

// ---- export ----

struct ExportArgs {
    std::string data, detections, log, archive;
};

void cmd_export(const ExportArgs& a, Run& run)
{
    SceneDataset ds = load_data(a.data);
    run.inputs = {a.data, a.log};
    run.config = {{"format", run.format}};
    ServiceConfig cfg;
    cfg.log_path = a.log;
    if (!a.log.empty() && !fs::exists(a.log)) throw Error(ErrorCode::IoError, "no annotation log at " + a.log);
    AnnotationService service(std::move(ds), {}, cfg);
    const auto files = service.export_files(export_format_from_string(run.format));
    if (!a.archive.empty()) {
        write_text_file(a.archive, make_tar(files));
        run.outputs.push_back(a.archive);
        if (run.out.empty()) run.out = a.archive;
        return;
    }
    if (run.out.empty() || run.out == "-") throw Error(ErrorCode::ConfigError, "export needs --out DIR or --archive FILE");
    for (const auto& [rel, content] : files) write_text_file(fs::path(run.out) / rel, content);
    run.outputs.push_back(run.out);
}

// ---- serve ----

struct ServeArgs {
    std::string data, detections, log, images, port_file;
    ServerConfig server;
    double radius = 150.0;
};

AnnotationServer* g_server = nullptr;

void on_signal(int)
{
    if (g_server) g_server->stop();
}

void cmd_serve(const ServeArgs& a)
{
    SceneDataset ds = a.data.empty() ? SceneDataset{} : load_pasadena(a.data);
    DetectionMap proposals = a.detections.empty() ? DetectionMap{} : load_detections(a.detections);
    ServiceConfig cfg;
    cfg.log_path = a.log;
    cfg.image_dir = a.images.empty() && !a.data.empty() ? fs::path(a.data) / "images" : fs::path(a.images);
    cfg.proposal_radius_px = a.radius;
    AnnotationService service(std::move(ds), std::move(proposals), cfg);
    AnnotationServer server(service, a.server);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.run([&](int port) {
        std::cerr << "serving on http://" << a.server.host << ":" << port << "\n";
        if (!a.port_file.empty()) write_text_file(a.port_file, std::to_string(port) + "\n");
    });
    g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mvgeo: multi-view street-level object matching and geo-localization"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "Read options from a TOML or INI file (flags take precedence)");
    app.require_subcommand(1);
    app.fallthrough();
    bool dump_config = false;
    app.add_flag("--dump-config", dump_config, "Print the effective configuration as TOML and exit");

    Run run;

    ProjectArgs pa;
    auto* project = app.add_subcommand("project", "Project detections between two panoramas");
    add_data(project, pa.data);
    project->add_option("--detections", pa.detections, "Detections JSON")->required();
    project->add_option("--x", pa.x, "Source image id")->required();
    project->add_option("--y", pa.y, "Destination image id")->required();
    add_common(project, run, {"json", "csv", "table"});

    MatchArgs ma;
    auto* match = app.add_subcommand("match", "Match detections across neighboring panoramas");
    add_data(match, ma.data);
    match->add_option("--detections", ma.detections, "Detections JSON")->required();
    add_matching(match, ma.pipeline.matching, ma.pipeline.jobs, ma.mode);
    add_common(match, run, {"json", "csv", "table"});

    LocalizeArgs la;
    auto* localize = app.add_subcommand("localize", "Link matches into tracks and geo-localize them");
    add_data(localize, la.data);
    localize->add_option("--detections", la.detections, "Detections JSON")->required();
    localize->add_option("--matches", la.matches, "Matches JSON from 'match' (recomputed when absent)");
    localize->add_flag("--single", la.single, "Localize every detection on its own");
    add_matching(localize, la.pipeline.matching, la.pipeline.jobs, la.mode);
    add_common(localize, run, {"json", "csv", "table"});

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score detections, matches and positions against ground truth");
    add_data(evaluate, ea.data);
    evaluate->add_option("--detections", ea.detections, "Detections JSON (detection mAP)");
    evaluate->add_option("--matches", ea.matches, "Matches JSON (re-identification accuracy)");
    evaluate->add_option("--objects", ea.objects, "Objects JSON (geo-localization MAE)");
    evaluate->add_option("--iou-threshold", ea.iou_threshold, "IoU for a true positive")->capture_default_str();
    evaluate->add_option("--reid-iou", ea.reid_iou, "IoU tying a detection to a labeled box")->capture_default_str();
    evaluate->add_option("--gate-m", ea.gate_m, "MAE matching radius, meters")->capture_default_str();
    add_common(evaluate, run, {"table", "json", "csv"});

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic street scene, or sweep a noise level");
    auto& sc = sa.sim;
    simulate->add_option("--seed", sc.seed, "Random seed")->capture_default_str();
    simulate->add_option("--objects", sc.n_objects, "Number of objects")->capture_default_str();
    simulate->add_option("--street-length", sc.street_length_m, "Street length, meters")->capture_default_str();
    simulate->add_option("--spacing", sc.camera_spacing_m, "Panorama spacing, meters")->capture_default_str();
    simulate->add_option("--lateral-min", sc.lateral_offset_min_m, "Closest object to the street axis, meters")
        ->capture_default_str();
    simulate->add_option("--lateral-max", sc.lateral_offset_max_m, "Farthest object from the street axis, meters")
        ->capture_default_str();
    simulate->add_option("--camera-height", sc.camera_height_m, "Camera height, meters")->capture_default_str();
    simulate->add_option("--object-height", sc.object_height_m, "Object height, meters")->capture_default_str();
    simulate->add_option("--object-width", sc.object_width_m, "Object width, meters")->capture_default_str();
    simulate->add_option("--yaw-noise", sc.yaw_noise_deg, "Recorded yaw noise sigma, degrees")->capture_default_str();
    simulate->add_option("--position-noise", sc.position_noise_m, "Recorded position noise sigma, meters")
        ->capture_default_str();
    simulate->add_option("--bbox-jitter", sc.bbox_jitter_px, "Detection box noise sigma, pixels")->capture_default_str();
    simulate->add_option("--terrain-noise", sc.terrain_noise_m, "Object ground height sigma, meters")
        ->capture_default_str();
    simulate->add_option("--dropout", sc.detection_dropout_p, "Probability a detection is missed")->capture_default_str();
    simulate->add_option("--clutter", sc.clutter_rate, "Expected false positives per image")->capture_default_str();
    simulate->add_option("--feature-dim", sc.feature_dim, "Appearance vector length")->capture_default_str();
    simulate->add_option("--feature-noise", sc.feature_noise, "Appearance noise sigma")->capture_default_str();
    simulate->add_flag("--identical-features", sc.identical_features, "Give every object the same appearance");
    simulate->add_option("--views", sc.views_per_object, "Panoramas that see each object")->capture_default_str();
    simulate->add_option("--sweep", sa.sweep_axis, "Sweep this axis instead of writing a scene")
        ->check(CLI::IsMember({"yaw_noise_deg", "position_noise_m", "bbox_jitter_px", "detection_dropout_p",
                               "feature_weight", "feature_noise"}));
    simulate->add_option("--values", sa.sweep_values, "Sweep values")->delimiter(',');
    simulate->add_option("--seeds", sa.seeds, "Seeds per sweep value")->capture_default_str();
    add_matching(simulate, sa.pipeline.matching, sa.pipeline.jobs, sa.mode);
    add_common(simulate, run, {"json", "csv"});

    ValidateArgs va;
    auto* validate_cmd = app.add_subcommand("validate", "Check a dataset against the schema invariants");
    add_data(validate_cmd, va.data);
    validate_cmd->add_option("--geojson", va.geojson, "Validate a GeoJSON FeatureCollection instead");
    validate_cmd->add_option("--max-appearances", va.max_appearances, "Upper bound on views per identity");
    add_common(validate_cmd, run, {"table", "json"});

    ExportArgs xa;
    auto* export_cmd = app.add_subcommand("export", "Export the annotation store as JSON or VOC");
    add_data(export_cmd, xa.data);
    export_cmd->add_option("--log", xa.log, "Annotation log (JSON lines)");
    export_cmd->add_option("--archive", xa.archive, "Write a tar archive instead of a directory");
    add_common(export_cmd, run, {"json", "voc"});

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
    add_data(serve, sv.data);
    serve->add_option("--detections", sv.detections, "Detections offered as box proposals");
    serve->add_option("--log", sv.log, "Annotation log (JSON lines); in-memory when absent");
    serve->add_option("--images", sv.images, "Directory of <image_id>.jpg (default: <data>/images)");
    serve->add_option("--host", sv.server.host, "Bind address")->capture_default_str();
    serve->add_option("--port", sv.server.port, "Port, 0 for any free port")->capture_default_str();
    serve->add_option("--port-file", sv.port_file, "Write the bound port here");
    serve->add_option("--cors-origin", sv.server.cors_origin, "Allowed browser origin")->capture_default_str();
    serve->add_option("--radius", sv.radius, "Proposal radius around the marker at 2048 px width")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitIo;
    }
    if (dump_config) {
        // effective options of the chosen subcommand as a [section]; unset
        // options without a default are left out so the file reads back
        auto* sub = app.get_subcommands().front();
        std::istringstream lines(sub->config_to_str(true, false));
        std::cout << "[" << sub->get_name() << "]\n";
        for (std::string line; std::getline(lines, line);) {
            if (!line.ends_with("=\"\"") && !line.ends_with("=")) std::cout << line << "\n";
        }
        return 0;
    }

    try {
        auto* sub = app.get_subcommands().front();
        run.name = sub->get_name();
        if (sub == project) {
            cmd_project(pa, run);
        } else if (sub == match) {
            resolve_mode(ma.pipeline, ma.mode);
            cmd_match(ma, run);
        } else if (sub == localize) {
            resolve_mode(la.pipeline, la.mode);
            cmd_localize(la, run);
        } else if (sub == evaluate) {
            cmd_evaluate(ea, run);
        } else if (sub == simulate) {
            resolve_mode(sa.pipeline, sa.mode);
            cmd_simulate(sa, run);
        } else if (sub == validate_cmd) {
            const int rc = cmd_validate(va, run);
            run.write_manifest();
            return rc;
        } else if (sub == export_cmd) {
            cmd_export(xa, run);
        } else if (sub == serve) {
            cmd_serve(sv);
            return 0;
        }
        run.write_manifest();
        return 0;
    } catch (const Error& e) {
        std::cerr << "mvgeo " << run.name << ": " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const ServiceError& e) {
        std::cerr << "mvgeo " << run.name << ": " << e.what() << "\n";
        return e.status() == 422 ? kExitValidation : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "mvgeo " << run.name << ": " << e.what() << "\n";
        return kExitFailure;
    }
}
