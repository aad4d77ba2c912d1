#include "mvgeo/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <thread>

#include "mvgeo/dataset.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"

namespace mvgeo {

double SimRng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SimRng::uniform(double lo, double hi)
{
    return lo + (hi - lo) * uniform();
}

double SimRng::normal(double mean, double stddev)
{
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return mean + stddev * z;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    return mean + stddev * r * std::cos(t);
}

std::size_t SimRng::index(std::size_t n)
{
    if (n == 0) return 0;
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::size_t SimRng::poisson(double lambda)
{
    if (!(lambda > 0.0)) return 0;
    const double limit = std::exp(-lambda);
    std::size_t k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

void SimConfig::validate() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (n_objects == 0) fail("n_objects must be positive");
    if (!(street_length_m > 0.0)) fail("street_length_m must be positive");
    if (!(camera_spacing_m > 0.0)) fail("camera_spacing_m must be positive");
    if (!(lateral_offset_min_m > 0.0) || lateral_offset_max_m < lateral_offset_min_m) {
        fail("lateral offsets must satisfy 0 < min <= max");
    }
    if (!(camera_height_m > 0.0)) fail("camera_height_m must be positive");
    if (!(object_height_m > 0.0) || !(object_width_m > 0.0)) fail("object size must be positive");
    if (yaw_noise_deg < 0.0 || position_noise_m < 0.0 || bbox_jitter_px < 0.0 || feature_noise < 0.0 ||
        terrain_noise_m < 0.0) {
        fail("noise levels must be non-negative");
    }
    if (detection_dropout_p < 0.0 || detection_dropout_p > 1.0) fail("detection_dropout_p must be in [0, 1]");
    if (clutter_rate < 0.0) fail("clutter_rate must be non-negative");
    if (feature_dim == 0) fail("feature_dim must be positive");
    if (views_per_object < 1) fail("views_per_object must be at least 1");
    if (pano.width_px <= 0 || pano.height_px <= 0) fail("panorama size must be positive");
    if (min_object_separation_m < 0.0) fail("min_object_separation_m must be non-negative");
    const auto n_cameras = static_cast<std::size_t>(std::floor(street_length_m / camera_spacing_m)) + 1;
    if (views_per_object > n_cameras) fail("views_per_object exceeds the number of cameras");
}

namespace {

std::string pano_id(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "pano_%04zu", i);
    return buf;
}

std::string object_id(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "obj_%04zu", i);
    return buf;
}

FeatureVector random_unit(SimRng& rng, std::size_t dim)
{
    FeatureVector v(dim);
    double n2 = 0.0;
    for (auto& x : v) {
        x = rng.normal(0.0, 1.0);
        n2 += x * x;
    }
    const double n = std::sqrt(n2);
    for (auto& x : v) x /= n;
    return v;
}

FeatureVector perturb(SimRng& rng, const FeatureVector& base, double sigma)
{
    FeatureVector v = base;
    if (sigma <= 0.0) return v;
    double n2 = 0.0;
    for (auto& x : v) {
        x += rng.normal(0.0, sigma);
        n2 += x * x;
    }
    const double n = std::sqrt(n2);
    if (n > 0.0) {
        for (auto& x : v) x /= n;
    }
    return v;
}

struct Placed {
    double along;
    double lateral;
};

}  // namespace

SimScene generate_scene(const SimConfig& cfg)
{
    cfg.validate();
    SimRng rng(cfg.seed);
    SimScene scene;

    const double h = deg_to_rad(cfg.street_heading_deg);
    const double ax = std::sin(h), ay = std::cos(h);   // along the street
    const double lx = std::cos(h), ly = -std::sin(h);  // to the right of it
    auto to_geo = [&](double along, double lateral) {
        return geo_from_enu(cfg.origin, along * ax + lateral * lx, along * ay + lateral * ly);
    };

    // cameras
    const auto n_cameras = static_cast<std::size_t>(std::floor(cfg.street_length_m / cfg.camera_spacing_m)) + 1;
    std::vector<double> cam_along(n_cameras);
    std::vector<std::string> ids(n_cameras);
    for (std::size_t i = 0; i < n_cameras; ++i) {
        cam_along[i] = static_cast<double>(i) * cfg.camera_spacing_m;
        ids[i] = pano_id(i);
        scene.true_cameras[ids[i]] =
            make_camera(to_geo(cam_along[i], 0.0), cfg.street_heading_deg, cfg.camera_height_m);
    }

    // objects, rejection-sampled to keep a minimum separation
    std::vector<Placed> placed;
    for (std::size_t i = 0; i < cfg.n_objects; ++i) {
        Placed p{};
        for (int attempt = 0;; ++attempt) {
            const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
            p.along = rng.uniform(0.0, cfg.street_length_m);
            p.lateral = side * rng.uniform(cfg.lateral_offset_min_m, cfg.lateral_offset_max_m);
            const bool clear = std::none_of(placed.begin(), placed.end(), [&](const Placed& q) {
                return std::hypot(p.along - q.along, p.lateral - q.lateral) < cfg.min_object_separation_m;
            });
            if (clear) break;
            if (attempt > 1000) throw Error(ErrorCode::ConfigError, "street too crowded for the object separation");
        }
        placed.push_back(p);
        scene.object_geo.push_back(to_geo(p.along, p.lateral));
        scene.object_ids.push_back(object_id(i));
    }

    std::vector<double> ground(cfg.n_objects);
    for (auto& g : ground) g = rng.normal(0.0, cfg.terrain_noise_m);

    // appearance
    std::vector<FeatureVector> appearance;
    if (cfg.identical_features) {
        const FeatureVector shared = random_unit(rng, cfg.feature_dim);
        appearance.assign(cfg.n_objects, shared);
    } else {
        for (std::size_t i = 0; i < cfg.n_objects; ++i) appearance.push_back(random_unit(rng, cfg.feature_dim));
    }

    // each object is seen by its nearest cameras
    std::vector<std::vector<std::size_t>> visible_in(n_cameras);
    for (std::size_t o = 0; o < cfg.n_objects; ++o) {
        std::vector<std::size_t> order(n_cameras);
        for (std::size_t i = 0; i < n_cameras; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(cam_along[a] - placed[o].along) < std::abs(cam_along[b] - placed[o].along);
        });
        for (std::size_t k = 0; k < cfg.views_per_object; ++k) visible_in[order[k]].push_back(o);
    }

    const double W = cfg.pano.width_px;
    const double H = cfg.pano.height_px;
    const auto span = static_cast<std::ptrdiff_t>(cfg.views_per_object) - 1;

    for (std::size_t c = 0; c < n_cameras; ++c) {
        const std::string& id = ids[c];
        const CameraPose& truth = scene.true_cameras[id];

        ImageRecord rec;
        rec.image_id = id;
        rec.pano = cfg.pano;
        const double de = rng.normal(0.0, cfg.position_noise_m);
        const double dn = rng.normal(0.0, cfg.position_noise_m);
        const double dyaw = rng.normal(0.0, cfg.yaw_noise_deg);
        rec.camera = make_camera(geo_from_enu(truth.location, de, dn), truth.yaw_deg + dyaw, truth.height_m);
        for (std::size_t j = 0; j < n_cameras; ++j) {
            const auto d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(c);
            if (j != c && std::abs(d) <= span) rec.neighbor_ids.push_back(ids[j]);
        }

        std::vector<std::pair<Detection, std::optional<std::size_t>>> dets;
        for (std::size_t o : visible_in[c]) {
            const GeoCoordinate& g = scene.object_geo[o];
            // the camera sits higher above a base that lies lower
            CameraPose eye = truth;
            eye.height_m = truth.height_m - ground[o];
            if (!(eye.height_m > 0.1)) eye.height_m = 0.1;
            const PixelPoint foot = pixel_from_geo(eye, g, cfg.pano);
            const double z = ground_distance(enu_from_geo(truth, g));
            const double bw = cfg.object_width_m * (W / (2.0 * std::numbers::pi)) / z;
            const double bh = cfg.object_height_m * (H / std::numbers::pi) / z;

            GroundTruthBox gt;
            gt.box.x_min = foot.x - bw / 2.0;
            if (gt.box.x_min < 0.0) gt.box.x_min += W;
            gt.box.x_max = gt.box.x_min + bw;
            gt.box.y_max = foot.y;
            gt.box.y_min = std::max(0.0, foot.y - bh);
            gt.instance_id = scene.object_ids[o];
            gt.geo = g;
            gt.distance_v = z;
            gt.heading_a = heading_from_column(foot.x, cfg.pano);
            gt.box_id = "b" + std::to_string(rec.ground_truth.size());

            const std::size_t box_index = rec.ground_truth.size();
            rec.ground_truth.push_back(gt);

            Identity& ident = scene.dataset.identities[scene.object_ids[o]];
            ident.instance_id = scene.object_ids[o];
            ident.geo = g;
            ident.appearances.push_back({id, box_index});

            // the detector's view of the box
            const bool dropped = rng.uniform() < cfg.detection_dropout_p;
            const double jx = rng.normal(0.0, cfg.bbox_jitter_px);
            const double jy = rng.normal(0.0, cfg.bbox_jitter_px);
            const double jw = rng.normal(0.0, cfg.bbox_jitter_px);
            const double jh = rng.normal(0.0, cfg.bbox_jitter_px);
            const double score = rng.uniform(0.5, 1.0);
            FeatureVector f = perturb(rng, appearance[o], cfg.feature_noise);
            if (dropped) continue;

            Detection d;
            const double w = std::max(1.0, bw + jw);
            const double hh = std::max(1.0, bh + jh);
            const double cx = foot.x + jx;
            d.box.x_min = std::fmod(cx - w / 2.0 + W, W);
            d.box.x_max = d.box.x_min + w;
            d.box.y_max = std::clamp(foot.y + jy, 1.0, H);
            d.box.y_min = std::max(0.0, d.box.y_max - hh);
            d.score = score;
            d.feature = std::move(f);
            dets.emplace_back(std::move(d), o);
        }

        const std::size_t n_clutter = rng.poisson(cfg.clutter_rate);
        for (std::size_t k = 0; k < n_clutter; ++k) {
            Detection d;
            const double w = rng.uniform(10.0, 80.0);
            const double hh = rng.uniform(20.0, 150.0);
            d.box.x_min = rng.uniform(0.0, W);
            d.box.x_max = d.box.x_min + w;
            d.box.y_max = rng.uniform(H / 2.0 + 10.0, 0.9 * H);
            d.box.y_min = std::max(0.0, d.box.y_max - hh);
            d.score = rng.uniform(0.05, 0.6);
            d.feature = random_unit(rng, cfg.feature_dim);
            dets.emplace_back(std::move(d), std::nullopt);
        }

        // detector output order carries no information
        for (std::size_t i = dets.size(); i > 1; --i) std::swap(dets[i - 1], dets[rng.index(i)]);

        auto& out = scene.detections[id];
        auto& oracle = scene.oracle[id];
        for (std::size_t i = 0; i < dets.size(); ++i) {
            dets[i].first.local_id = static_cast<int>(i);
            out.push_back(std::move(dets[i].first));
            oracle[static_cast<int>(i)] = dets[i].second;
        }
        scene.dataset.images[id] = std::move(rec);
    }
    return scene;
}

void save_scene(const SimScene& scene, const std::filesystem::path& root)
{
    save_pasadena(scene.dataset, root);
    write_text_file(root / "detections.json", detections_to_json(scene.detections));

    json oracle = json::object();
    for (const auto& [image, owners] : scene.oracle) {
        json per = json::object();
        for (const auto& [local, owner] : owners) {
            per[std::to_string(local)] = owner ? json(scene.object_ids[*owner]) : json(nullptr);
        }
        oracle[image] = per;
    }
    write_text_file(root / "oracle.json", dump_stable(oracle));

    json cams = json::object();
    for (const auto& [image, cam] : scene.true_cameras) {
        cams[image] = {{"lat", cam.location.lat_deg},
                       {"lng", cam.location.lng_deg},
                       {"yaw_deg", cam.yaw_deg},
                       {"height_m", cam.height_m}};
    }
    write_text_file(root / "true_cameras.json", dump_stable(cams));
}

SceneEvaluation evaluate_scene(const SimScene& scene, const PipelineConfig& cfg)
{
    SceneEvaluation ev;
    ev.n_objects = scene.object_geo.size();

    const PipelineOutput out = localize_pipeline(scene.dataset, scene.detections, cfg);

    std::vector<PairEvaluation> pairs;
    for (const auto& m : out.matches) {
        PairEvaluation pe;
        pe.x = &scene.dataset.image(m.x_image);
        pe.y = &scene.dataset.image(m.y_image);
        pe.dets_x = scene.detections.at(m.x_image);
        pe.dets_y = scene.detections.at(m.y_image);
        pe.result = m.result;
        pairs.push_back(std::move(pe));
    }
    ev.reid = reid_accuracy(pairs);

    std::vector<GeoCoordinate> tri;
    for (const auto& o : out.objects) {
        if (o.geo) tri.push_back(*o.geo);
    }
    try {
        ev.triangulated = geolocalization_mae(tri, scene.object_geo);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyInput) throw;
    }
    try {
        ev.single_view =
            geolocalization_mae(localize_all_single(scene.dataset, scene.detections, cfg.matching), scene.object_geo);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyInput) throw;
    }

    std::size_t appearances = 0, detected = 0;
    for (const auto& [id, rec] : scene.dataset.images) appearances += rec.ground_truth.size();
    for (const auto& [id, owners] : scene.oracle) {
        for (const auto& [local, owner] : owners) detected += owner.has_value();
    }
    ev.detection_coverage =
        appearances > 0 ? static_cast<double>(detected) / static_cast<double>(appearances) : 0.0;
    return ev;
}

std::string_view to_string(SweepAxis axis) noexcept
{
    switch (axis) {
    case SweepAxis::YawNoise: return "yaw_noise_deg";
    case SweepAxis::PositionNoise: return "position_noise_m";
    case SweepAxis::BboxJitter: return "bbox_jitter_px";
    case SweepAxis::Dropout: return "detection_dropout_p";
    case SweepAxis::FeatureWeight: return "feature_weight";
    case SweepAxis::FeatureNoise: return "feature_noise";
    }
    return "unknown";
}

SweepAxis sweep_axis_from_string(std::string_view name)
{
    for (auto a : {SweepAxis::YawNoise, SweepAxis::PositionNoise, SweepAxis::BboxJitter, SweepAxis::Dropout,
                   SweepAxis::FeatureWeight, SweepAxis::FeatureNoise}) {
        if (to_string(a) == name) return a;
    }
    throw Error(ErrorCode::ConfigError, "unknown sweep axis '" + std::string(name) + "'");
}

std::vector<SweepRow> sweep(const SweepSpec& spec, const PipelineConfig& cfg)
{
    if (spec.seeds == 0) throw Error(ErrorCode::ConfigError, "sweep needs at least one seed");
    std::vector<SweepRow> rows;
    for (double value : spec.values) {
        SimConfig sc = spec.base;
        PipelineConfig pc = cfg;
        switch (spec.axis) {
        case SweepAxis::YawNoise: sc.yaw_noise_deg = value; break;
        case SweepAxis::PositionNoise: sc.position_noise_m = value; break;
        case SweepAxis::BboxJitter: sc.bbox_jitter_px = value; break;
        case SweepAxis::Dropout: sc.detection_dropout_p = value; break;
        case SweepAxis::FeatureWeight: pc.matching.feature_weight = value; break;
        case SweepAxis::FeatureNoise: sc.feature_noise = value; break;
        }
        pc.matching.validate();

        SweepRow row;
        row.axis = spec.axis;
        row.value = value;
        row.seeds = spec.seeds;
        // seeds run in parallel; the reduction below is in seed order
        std::vector<SceneEvaluation> evals(spec.seeds);
        std::vector<std::exception_ptr> errors(spec.seeds);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            PipelineConfig serial = pc;
            serial.jobs = 1;
            for (std::size_t s; (s = next.fetch_add(1)) < spec.seeds;) {
                try {
                    SimConfig seeded = sc;
                    seeded.seed = spec.base.seed + s;
                    evals[s] = evaluate_scene(generate_scene(seeded), serial);
                } catch (...) {
                    errors[s] = std::current_exception();
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            const std::size_t n_threads = std::clamp<std::size_t>(cfg.jobs, 1, spec.seeds);
            for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
            worker();
        }
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }

        std::size_t mae_n = 0, single_n = 0;
        for (const SceneEvaluation& ev : evals) {
            row.reid_accuracy += ev.reid.accuracy;
            row.detection_coverage += ev.detection_coverage;
            if (ev.triangulated) {
                row.mae_m += ev.triangulated->mae_m;
                row.geo_coverage += ev.triangulated->gt_coverage;
                ++mae_n;
            }
            if (ev.single_view) {
                row.single_view_mae_m += ev.single_view->mae_m;
                ++single_n;
            }
        }
        const auto n = static_cast<double>(spec.seeds);
        row.reid_accuracy /= n;
        row.detection_coverage /= n;
        row.geo_coverage /= n;
        row.mae_m = mae_n ? row.mae_m / static_cast<double>(mae_n) : std::nan("");
        row.single_view_mae_m = single_n ? row.single_view_mae_m / static_cast<double>(single_n) : std::nan("");
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    os << "axis,value,seeds,reid_accuracy,mae_m,single_view_mae_m,detection_coverage,geo_coverage\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(r.axis)).c_str(),
                      r.value, r.seeds, r.reid_accuracy, r.mae_m, r.single_view_mae_m, r.detection_coverage,
                      r.geo_coverage);
        os << buf;
    }
    return os.str();
}

}  // namespace mvgeo
