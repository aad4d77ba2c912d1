#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvgeo/dataset.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"
#include "mvgeo/localization.hpp"
#include "mvgeo/losses.hpp"
#include "mvgeo/matching.hpp"
#include "mvgeo/metrics.hpp"
#include "mvgeo/pipeline_io.hpp"
#include "mvgeo/simulator.hpp"
#include "mvgeo/version.hpp"

namespace py = pybind11;
using namespace mvgeo;

namespace {

CostMatrix to_cost_matrix(const std::vector<std::vector<double>>& rows)
{
    CostMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols) throw Error(ErrorCode::LengthMismatch, "cost matrix rows differ in length");
        for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

py::dict match_dict(const MatchingResult& r)
{
    py::list pairs;
    for (const auto& p : r.pairs) {
        py::dict d;
        d["x"] = p.det_x_local_id;
        d["y"] = p.det_y_local_id;
        d["projected_iou"] = p.projected_iou;
        d["feature_dist"] = p.feature_dist;
        d["cost"] = p.cost;
        pairs.append(d);
    }
    py::dict out;
    out["pairs"] = pairs;
    out["unmatched_x"] = r.unmatched_x;
    out["unmatched_y"] = r.unmatched_y;
    return out;
}

py::dict mae_dict(const MaeEval& e)
{
    py::dict d;
    d["mae_m"] = e.mae_m;
    d["matched"] = e.matched;
    d["predictions"] = e.predictions;
    d["coverage"] = e.coverage;
    d["gt_coverage"] = e.gt_coverage;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Multi-view street-level object matching and geo-localization";
    m.attr("__version__") = kVersion;
    static py::exception<Error> error(m, "MvgeoError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<GeoCoordinate>(m, "GeoCoordinate")
        .def(py::init([](double lat, double lng) { return make_geo(lat, lng); }), py::arg("lat"), py::arg("lng"))
        .def_readonly("lat", &GeoCoordinate::lat_deg)
        .def_readonly("lng", &GeoCoordinate::lng_deg)
        .def(py::self == py::self)
        .def("__repr__", [](const GeoCoordinate& g) {
            return "GeoCoordinate(" + std::to_string(g.lat_deg) + ", " + std::to_string(g.lng_deg) + ")";
        });

    py::class_<CameraPose>(m, "CameraPose")
        .def(py::init([](GeoCoordinate loc, double yaw, double h) { return make_camera(loc, yaw, h); }),
             py::arg("location"), py::arg("yaw_deg") = 0.0, py::arg("height_m") = 2.5)
        .def_readonly("location", &CameraPose::location)
        .def_readonly("yaw_deg", &CameraPose::yaw_deg)
        .def_readonly("height_m", &CameraPose::height_m);

    py::class_<PanoramaGeometry>(m, "PanoramaGeometry")
        .def(py::init([](int w, int h) { return PanoramaGeometry{w, h}; }), py::arg("width") = 2048,
             py::arg("height") = 1024)
        .def_readwrite("width", &PanoramaGeometry::width_px)
        .def_readwrite("height", &PanoramaGeometry::height_px);

    py::class_<PixelPoint>(m, "PixelPoint")
        .def(py::init([](double x, double y) { return PixelPoint{x, y}; }), py::arg("x"), py::arg("y"))
        .def_readwrite("x", &PixelPoint::x)
        .def_readwrite("y", &PixelPoint::y);

    py::class_<EnuVector>(m, "EnuVector")
        .def_readonly("e_x", &EnuVector::e_x)
        .def_readonly("e_y", &EnuVector::e_y)
        .def_readonly("e_z", &EnuVector::e_z);

    py::class_<BoundingBox>(m, "BoundingBox")
        .def(py::init([](double a, double b, double c, double d) { return BoundingBox{a, b, c, d}; }),
             py::arg("x_min"), py::arg("y_min"), py::arg("x_max"), py::arg("y_max"))
        .def_readwrite("x_min", &BoundingBox::x_min)
        .def_readwrite("y_min", &BoundingBox::y_min)
        .def_readwrite("x_max", &BoundingBox::x_max)
        .def_readwrite("y_max", &BoundingBox::y_max)
        .def("as_tuple", [](const BoundingBox& b) { return py::make_tuple(b.x_min, b.y_min, b.x_max, b.y_max); })
        .def(py::self == py::self);

    py::class_<Detection>(m, "Detection")
        .def(py::init([](BoundingBox box, double score, int label, int local_id, std::optional<FeatureVector> f) {
                 return Detection{box, label, score, local_id, std::move(f)};
             }),
             py::arg("box"), py::arg("score") = 1.0, py::arg("label") = 0, py::arg("local_id") = 0,
             py::arg("feature") = py::none())
        .def_readwrite("box", &Detection::box)
        .def_readwrite("score", &Detection::score)
        .def_readwrite("label", &Detection::class_label)
        .def_readwrite("local_id", &Detection::local_id)
        .def_readwrite("feature", &Detection::feature);

    m.def("enu_from_geo", &enu_from_geo, py::arg("camera"), py::arg("target"));
    m.def("geo_from_enu", &geo_from_enu, py::arg("origin"), py::arg("e_x"), py::arg("e_y"));
    m.def("pixel_from_geo", &pixel_from_geo, py::arg("camera"), py::arg("target"),
          py::arg("pano") = PanoramaGeometry{});
    m.def("geo_from_pixel", &geo_from_pixel, py::arg("camera"), py::arg("pixel"), py::arg("pano") = PanoramaGeometry{});
    m.def("haversine_distance", &haversine_distance, py::arg("a"), py::arg("b"));
    m.def("heading_from_column", &heading_from_column, py::arg("x"), py::arg("pano") = PanoramaGeometry{});

    m.def("iou", &iou, py::arg("a"), py::arg("b"), py::arg("wrap_width") = py::none());
    m.def(
        "nms",
        [](const std::vector<Detection>& dets, double thr, std::optional<double> wrap) { return nms(dets, thr, wrap); },
        py::arg("detections"), py::arg("iou_threshold") = 0.5, py::arg("wrap_width") = py::none());
    m.def(
        "project_box",
        [](const BoundingBox& box, const CameraPose& src, const CameraPose& dst, const PanoramaGeometry& ps,
           const PanoramaGeometry& pd) {
            const ProjectedBox p = project_box(box, src, dst, ps, pd);
            return py::make_tuple(p.box, p.z_src, p.z_dst);
        },
        py::arg("box"), py::arg("cam_src"), py::arg("cam_dst"), py::arg("pano_src") = PanoramaGeometry{},
        py::arg("pano_dst") = PanoramaGeometry{});

    py::class_<MatchingConfig>(m, "MatchingConfig")
        .def(py::init<>())
        .def_readwrite("conf_threshold", &MatchingConfig::conf_threshold)
        .def_readwrite("nms_iou", &MatchingConfig::nms_iou)
        .def_readwrite("gate_iou", &MatchingConfig::gate_iou)
        .def_readwrite("feature_weight", &MatchingConfig::feature_weight)
        .def_readwrite("apply_filters", &MatchingConfig::apply_filters)
        .def_property(
            "greedy", [](const MatchingConfig& c) { return c.assignment_mode == AssignmentMode::Greedy; },
            [](MatchingConfig& c, bool g) { c.assignment_mode = g ? AssignmentMode::Greedy : AssignmentMode::Optimal; })
        .def("validate", &MatchingConfig::validate);

    m.def(
        "cross_view_match",
        [](const std::vector<Detection>& dx, const CameraPose& cx, const std::vector<Detection>& dy,
           const CameraPose& cy, const MatchingConfig& cfg, const PanoramaGeometry& pano) {
            return match_dict(cross_view_match({dx, cx, pano}, {dy, cy, pano}, cfg));
        },
        py::arg("dets_x"), py::arg("cam_x"), py::arg("dets_y"), py::arg("cam_y"), py::arg("config") = MatchingConfig{},
        py::arg("pano") = PanoramaGeometry{});

    m.def(
        "assign",
        [](const std::vector<std::vector<double>>& costs, bool greedy) {
            return assign(to_cost_matrix(costs), greedy ? AssignmentMode::Greedy : AssignmentMode::Optimal);
        },
        py::arg("costs"), py::arg("greedy") = false,
        "Row/column pairs; inf marks a forbidden pair. Cardinality first, then total cost.");

    py::class_<Observation>(m, "Observation")
        .def(py::init([](CameraPose cam, PixelPoint px, PanoramaGeometry pano, double w) {
                 return Observation{cam, px, pano, w};
             }),
             py::arg("camera"), py::arg("pixel"), py::arg("pano") = PanoramaGeometry{}, py::arg("weight") = 1.0);

    m.def(
        "triangulate",
        [](const std::vector<Observation>& obs) {
            const TriangulationResult r = triangulate(obs);
            return py::make_tuple(r.geo, r.residual_m);
        },
        py::arg("observations"), "Returns (geo, residual_m).");
    m.def("localize_single", &localize_single, py::arg("detection"), py::arg("camera"),
          py::arg("pano") = PanoramaGeometry{});

    m.def(
        "softmax_log_loss", [](const std::vector<double>& z, std::size_t k) { return softmax_log_loss(z, k); },
        py::arg("logits"), py::arg("true_class"));
    m.def(
        "smooth_l1", [](const std::vector<double>& p, const std::vector<double>& t) { return smooth_l1(p, t); },
        py::arg("pred"), py::arg("target"));
    m.def(
        "contrastive_loss",
        [](const std::vector<double>& a, const std::vector<double>& b, bool same, double margin) {
            return contrastive_loss(a, b, same, margin);
        },
        py::arg("f1"), py::arg("f2"), py::arg("same"), py::arg("margin") = 1.0);
    m.def(
        "rmse_loss",
        [](const std::vector<GeoCoordinate>& p, const std::vector<GeoCoordinate>& g) { return rmse_loss(p, g); },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "geolocalization_mae",
        [](const std::vector<GeoCoordinate>& p, const std::vector<GeoCoordinate>& g, double gate) {
            return mae_dict(geolocalization_mae(p, g, gate));
        },
        py::arg("pred"), py::arg("gt"), py::arg("gate_m") = kMaeGateM);

    // Dataset-level entry points exchange the same JSON documents as the CLI.
    m.def(
        "validate_dataset",
        [](const std::filesystem::path& root) {
            const ValidationReport r = validate(load_pasadena(root, {}));
            py::list v;
            for (const auto& x : r.violations) v.append(py::make_tuple(x.kind, x.message));
            return v;
        },
        py::arg("root"), "Violations as (kind, message); empty when the dataset is sound.");
    m.def(
        "run_pipeline",
        [](const std::filesystem::path& root, const std::filesystem::path& detections, const MatchingConfig& cfg,
           unsigned jobs) {
            const SceneDataset ds = load_pasadena(root);
            const DetectionMap dets = load_detections(detections);
            PipelineConfig pc{cfg, jobs};
            PipelineOutput out;
            {
                py::gil_scoped_release release;
                out = localize_pipeline(ds, dets, pc);
            }
            return py::make_tuple(matches_to_json(out.matches).dump(), objects_to_json(out.objects).dump());
        },
        py::arg("root"), py::arg("detections"), py::arg("config") = MatchingConfig{}, py::arg("jobs") = 1,
        "Returns (matches_json, objects_json) as strings.");

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("n_objects", &SimConfig::n_objects)
        .def_readwrite("street_length_m", &SimConfig::street_length_m)
        .def_readwrite("camera_spacing_m", &SimConfig::camera_spacing_m)
        .def_readwrite("yaw_noise_deg", &SimConfig::yaw_noise_deg)
        .def_readwrite("position_noise_m", &SimConfig::position_noise_m)
        .def_readwrite("bbox_jitter_px", &SimConfig::bbox_jitter_px)
        .def_readwrite("terrain_noise_m", &SimConfig::terrain_noise_m)
        .def_readwrite("detection_dropout_p", &SimConfig::detection_dropout_p)
        .def_readwrite("clutter_rate", &SimConfig::clutter_rate)
        .def_readwrite("feature_dim", &SimConfig::feature_dim)
        .def_readwrite("feature_noise", &SimConfig::feature_noise)
        .def_readwrite("identical_features", &SimConfig::identical_features)
        .def_readwrite("views_per_object", &SimConfig::views_per_object);

    m.def(
        "simulate",
        [](const SimConfig& cfg, const std::filesystem::path& out) {
            const SimScene s = generate_scene(cfg);
            save_scene(s, out);
            return s.object_geo;
        },
        py::arg("config"), py::arg("out_dir"), "Writes a synthetic scene; returns the true object positions.");
    m.def(
        "evaluate_simulation",
        [](const SimConfig& cfg, const MatchingConfig& mc) {
            SceneEvaluation e;
            {
                py::gil_scoped_release release;
                e = evaluate_scene(generate_scene(cfg), PipelineConfig{mc, 1});
            }
            py::dict d;
            d["reid_accuracy"] = e.reid.accuracy;
            d["detection_coverage"] = e.detection_coverage;
            d["triangulated"] = e.triangulated ? py::object(mae_dict(*e.triangulated)) : py::none();
            d["single_view"] = e.single_view ? py::object(mae_dict(*e.single_view)) : py::none();
            return d;
        },
        py::arg("config"), py::arg("matching") = MatchingConfig{});
    m.def(
        "sweep",
        [](const SimConfig& base, const std::string& axis, const std::vector<double>& values, std::size_t seeds,
           const MatchingConfig& mc, unsigned jobs) {
            SweepSpec spec{base, sweep_axis_from_string(axis), values, seeds};
            std::vector<SweepRow> rows;
            {
                py::gil_scoped_release release;
                rows = mvgeo::sweep(spec, PipelineConfig{mc, jobs});
            }
            return sweep_to_csv(rows);
        },
        py::arg("base"), py::arg("axis"), py::arg("values"), py::arg("seeds") = 20,
        py::arg("matching") = MatchingConfig{}, py::arg("jobs") = 1, "CSV text, one row per value.");
}
