#include "mvgeo/localization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>
#include <thread>
#include <tuple>

#include "mvgeo/error.hpp"

namespace mvgeo {

std::string_view to_string(LocalizationMethod method) noexcept
{
    switch (method) {
    case LocalizationMethod::Triangulated: return "triangulated";
    case LocalizationMethod::SingleView: return "single_view";
    case LocalizationMethod::Failed: break;
    }
    return "failed";
}

GeoCoordinate localize_single(const Detection& det, const CameraPose& camera, const PanoramaGeometry& pano)
{
    return geo_from_pixel(camera, det.box.footpoint(static_cast<double>(pano.width_px)), pano);
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Ray {
    CameraPose camera;
    double px = 0.0;  // camera position in the anchor frame
    double py = 0.0;
    double bearing = 0.0;
    double weight = 0.0;
};

// Perpendicular and along-ray offsets of a ground point from ray i, in the
// camera's own local frame.
std::pair<double, double> ray_offsets(const Ray& ray, const GeoCoordinate& target)
{
    const EnuVector e = enu_from_geo(ray.camera, target);
    const double c = std::cos(ray.bearing);
    const double s = std::sin(ray.bearing);
    return {e.e_x * c - e.e_y * s, e.e_x * s + e.e_y * c};
}

bool solve2(const std::array<double, 4>& a, const std::array<double, 2>& b, std::array<double, 2>& x)
{
    const double det = a[0] * a[3] - a[1] * a[2];
    const double scale = std::max({std::abs(a[0]), std::abs(a[3]), 1e-300});
    if (!(std::abs(det) > 1e-14 * scale * scale)) return false;
    x[0] = (b[0] * a[3] - a[1] * b[1]) / det;
    x[1] = (a[0] * b[1] - a[2] * b[0]) / det;
    return true;
}

}  // namespace

TriangulationResult triangulate(std::span<const Observation> obs)
{
    if (obs.size() < 2) throw Error(ErrorCode::InsufficientData, "triangulation needs at least two observations");

    // Anchor the tangent plane at the centroid of the camera positions.
    const double lng0 = obs.front().camera.location.lng_deg;
    double lat_sum = 0.0;
    double dlng_sum = 0.0;
    double w_sum = 0.0;
    for (const auto& o : obs) {
        lat_sum += o.camera.location.lat_deg;
        dlng_sum += wrap_longitude(o.camera.location.lng_deg - lng0);
        w_sum += std::max(0.0, o.weight);
    }
    const double count = static_cast<double>(obs.size());
    const GeoCoordinate anchor{lat_sum / count, wrap_longitude(lng0 + dlng_sum / count)};
    const CameraPose anchor_cam{anchor, 0.0, 1.0};

    std::vector<Ray> rays;
    rays.reserve(obs.size());
    for (const auto& o : obs) {
        const EnuVector p = enu_from_geo(anchor_cam, o.camera.location);
        const double w = w_sum > 0.0 ? std::max(0.0, o.weight) / w_sum : 1.0 / count;
        rays.push_back({o.camera, p.e_x, p.e_y, bearing_from_column(o.camera, o.pixel.x, o.pano), w});
    }

    double spread = 0.0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        for (std::size_t j = i + 1; j < rays.size(); ++j) {
            if (rays[i].weight <= 0.0 || rays[j].weight <= 0.0) continue;
            double d = std::fmod(std::abs(rays[i].bearing - rays[j].bearing), kPi);
            spread = std::max(spread, std::min(d, kPi - d));
        }
    }
    if (spread < deg_to_rad(kMinBearingSpreadDeg)) {
        throw Error(ErrorCode::DegenerateBearings, "bearing spread below " + std::to_string(kMinBearingSpreadDeg) + " deg");
    }

    // Linear intersection in the anchor frame: minimize sum w (n . (q - p))^2.
    std::array<double, 4> a{0, 0, 0, 0};
    std::array<double, 2> b{0, 0};
    for (const auto& r : rays) {
        const double nx = std::cos(r.bearing);
        const double ny = -std::sin(r.bearing);
        const double np = nx * r.px + ny * r.py;
        a[0] += r.weight * nx * nx;
        a[1] += r.weight * nx * ny;
        a[2] += r.weight * ny * nx;
        a[3] += r.weight * ny * ny;
        b[0] += r.weight * nx * np;
        b[1] += r.weight * ny * np;
    }
    std::array<double, 2> q{};
    if (!solve2(a, b, q)) throw Error(ErrorCode::DegenerateBearings, "bearing rays are parallel");

    auto to_geo = [&](const std::array<double, 2>& v) { return geo_from_enu(anchor, v[0], v[1]); };

    // Gauss-Newton on the perpendicular offsets measured in each camera's
    // own frame, so consistent rays meet exactly at the generating point.
    constexpr double kStep = 1e-3;
    for (int iter = 0; iter < 25; ++iter) {
        std::array<double, 4> jtj{0, 0, 0, 0};
        std::array<double, 2> jtr{0, 0};
        const GeoCoordinate here = to_geo(q);
        const GeoCoordinate gx_p = to_geo({q[0] + kStep, q[1]});
        const GeoCoordinate gx_m = to_geo({q[0] - kStep, q[1]});
        const GeoCoordinate gy_p = to_geo({q[0], q[1] + kStep});
        const GeoCoordinate gy_m = to_geo({q[0], q[1] - kStep});
        for (const auto& r : rays) {
            const double res = ray_offsets(r, here).first;
            const double jx = (ray_offsets(r, gx_p).first - ray_offsets(r, gx_m).first) / (2.0 * kStep);
            const double jy = (ray_offsets(r, gy_p).first - ray_offsets(r, gy_m).first) / (2.0 * kStep);
            jtj[0] += r.weight * jx * jx;
            jtj[1] += r.weight * jx * jy;
            jtj[2] += r.weight * jy * jx;
            jtj[3] += r.weight * jy * jy;
            jtr[0] -= r.weight * jx * res;
            jtr[1] -= r.weight * jy * res;
        }
        std::array<double, 2> delta{};
        if (!solve2(jtj, jtr, delta)) break;
        q[0] += delta[0];
        q[1] += delta[1];
        if (std::hypot(delta[0], delta[1]) < 1e-10) break;
    }

    TriangulationResult out;
    out.geo = to_geo(q);
    out.n_views = obs.size();
    double sq = 0.0;
    for (const auto& r : rays) {
        const auto [perp, along] = ray_offsets(r, out.geo);
        if (r.weight > 0.0 && along <= 0.0) {
            throw Error(ErrorCode::DegenerateBearings, "bearing rays intersect behind a camera");
        }
        sq += r.weight * perp * perp;
    }
    out.residual_m = std::sqrt(sq);
    return out;
}

BoundingBox ProjectionCorrection::apply(const BoundingBox& p) const noexcept
{
    const double cx = x.center_offset + x.center_gain * 0.5 * (p.x_min + p.x_max);
    const double ex = x.extent_offset + x.extent_gain * p.width();
    const double cy = y.center_offset + y.center_gain * 0.5 * (p.y_min + p.y_max);
    const double ey = y.extent_offset + y.extent_gain * p.height();
    return {cx - 0.5 * ex, cy - 0.5 * ey, cx + 0.5 * ex, cy + 0.5 * ey};
}

bool ProjectionCorrection::is_identity(double tol) const noexcept
{
    auto axis_identity = [tol](const AxisCorrection& a) {
        return std::abs(a.center_offset) <= tol && std::abs(a.center_gain - 1.0) <= tol &&
               std::abs(a.extent_offset) <= tol && std::abs(a.extent_gain - 1.0) <= tol;
    };
    return axis_identity(x) && axis_identity(y);
}

double rms_corner_residual(std::span<const std::pair<BoundingBox, BoundingBox>> pairs) noexcept
{
    if (pairs.empty()) return 0.0;
    double sq = 0.0;
    for (const auto& [p, g] : pairs) {
        const double dx0 = p.x_min - g.x_min, dx1 = p.x_max - g.x_max;
        const double dy0 = p.y_min - g.y_min, dy1 = p.y_max - g.y_max;
        sq += dx0 * dx0 + dx1 * dx1 + dy0 * dy0 + dy1 * dy1;
    }
    // four corners per box, each corner carries one x and one y term twice over
    return std::sqrt(sq / (2.0 * static_cast<double>(pairs.size())));
}

namespace {

// Fits target ~ offset + gain * source; degenerate spread falls back to a
// pure offset.
std::pair<double, double> fit_line(const std::vector<double>& src, const std::vector<double>& dst)
{
    const double n = static_cast<double>(src.size());
    const double ms = std::accumulate(src.begin(), src.end(), 0.0) / n;
    const double md = std::accumulate(dst.begin(), dst.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        sxx += (src[i] - ms) * (src[i] - ms);
        sxy += (src[i] - ms) * (dst[i] - md);
    }
    if (sxx <= 1e-12 * n * (1.0 + ms * ms)) return {md - ms, 1.0};
    const double gain = sxy / sxx;
    return {md - gain * ms, gain};
}

}  // namespace

ProjectionCorrection fit_projection_correction(std::span<const std::pair<BoundingBox, BoundingBox>> train_pairs)
{
    if (train_pairs.size() < kMinCorrectionPairs) {
        throw Error(ErrorCode::InsufficientData,
                    "projection correction needs at least " + std::to_string(kMinCorrectionPairs) + " pairs");
    }
    std::vector<double> pcx, gcx, pex, gex, pcy, gcy, pey, gey;
    for (const auto& [p, g] : train_pairs) {
        pcx.push_back(0.5 * (p.x_min + p.x_max));
        gcx.push_back(0.5 * (g.x_min + g.x_max));
        pex.push_back(p.width());
        gex.push_back(g.width());
        pcy.push_back(0.5 * (p.y_min + p.y_max));
        gcy.push_back(0.5 * (g.y_min + g.y_max));
        pey.push_back(p.height());
        gey.push_back(g.height());
    }
    ProjectionCorrection c;
    std::tie(c.x.center_offset, c.x.center_gain) = fit_line(pcx, gcx);
    std::tie(c.x.extent_offset, c.x.extent_gain) = fit_line(pex, gex);
    std::tie(c.y.center_offset, c.y.center_gain) = fit_line(pcy, gcy);
    std::tie(c.y.extent_offset, c.y.extent_gain) = fit_line(pey, gey);
    c.n_pairs = train_pairs.size();
    c.rms_before = rms_corner_residual(train_pairs);
    std::vector<std::pair<BoundingBox, BoundingBox>> corrected;
    corrected.reserve(train_pairs.size());
    for (const auto& [p, g] : train_pairs) corrected.emplace_back(c.apply(p), g);
    c.rms_after = rms_corner_residual(corrected);
    return c;
}

namespace {

DetectionMap prepare_detections(const DetectionMap& detections, const SceneDataset& dataset,
                                const MatchingConfig& cfg)
{
    if (!cfg.apply_filters) return detections;
    DetectionMap out;
    for (const auto& [image_id, dets] : detections) {
        std::optional<double> wrap;
        if (const auto it = dataset.images.find(image_id); it != dataset.images.end()) {
            wrap = static_cast<double>(it->second.pano.width_px);
        }
        out[image_id] = nms(filter_candidates(dets, cfg), cfg.nms_iou, wrap);
    }
    return out;
}

struct DisjointSets {
    std::vector<std::size_t> parent;
    std::vector<std::set<std::string>> images;

    std::size_t find(std::size_t v)
    {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    }
};

}  // namespace

std::vector<std::pair<std::string, std::string>> neighbor_pairs(const SceneDataset& dataset,
                                                                const DetectionMap& detections)
{
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& [image_id, record] : dataset.images) {
        if (!detections.contains(image_id)) continue;
        for (const auto& n : record.neighbor_ids) {
            if (n == image_id || !dataset.images.contains(n) || !detections.contains(n)) continue;
            pairs.insert(std::minmax(image_id, n));
        }
    }
    return {pairs.begin(), pairs.end()};
}

std::vector<ImagePairMatch> match_all_pairs(const SceneDataset& dataset, const DetectionMap& detections,
                                            const PipelineConfig& cfg)
{
    cfg.matching.validate();
    const DetectionMap prepared = prepare_detections(detections, dataset, cfg.matching);
    MatchingConfig inner = cfg.matching;
    inner.apply_filters = false;

    const auto pairs = neighbor_pairs(dataset, prepared);
    std::vector<ImagePairMatch> out(pairs.size());
    std::vector<std::exception_ptr> errors(pairs.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t k = begin; k < pairs.size(); k += stride) {
            const auto& [a, b] = pairs[k];
            const ImageRecord& ra = dataset.images.at(a);
            const ImageRecord& rb = dataset.images.at(b);
            try {
                out[k] = {a, b,
                          cross_view_match({prepared.at(a), ra.camera, ra.pano}, {prepared.at(b), rb.camera, rb.pano},
                                           inner)};
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(std::max<std::size_t>(pairs.size(), 1))));
    if (jobs == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> threads;
        for (unsigned t = 0; t < jobs; ++t) threads.emplace_back(work, t, jobs);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<GeoCoordinate> localize_all_single(const SceneDataset& dataset, const DetectionMap& detections,
                                               const MatchingConfig& cfg)
{
    const DetectionMap prepared = prepare_detections(detections, dataset, cfg);
    std::vector<GeoCoordinate> out;
    for (const auto& [image_id, dets] : prepared) {
        const auto it = dataset.images.find(image_id);
        if (it == dataset.images.end()) continue;
        for (const auto& d : dets) {
            try {
                out.push_back(localize_single(d, it->second.camera, it->second.pano));
            } catch (const Error&) {
            }
        }
    }
    return out;
}

PipelineOutput localize_pipeline(const SceneDataset& dataset, const DetectionMap& detections,
                                 const PipelineConfig& cfg)
{
    PipelineOutput output;
    output.matches = match_all_pairs(dataset, detections, cfg);
    output.objects = localize_tracks(dataset, detections, output.matches, cfg);
    return output;
}

std::vector<LocalizedObject> localize_tracks(const SceneDataset& dataset, const DetectionMap& detections,
                                             std::span<const ImagePairMatch> matches, const PipelineConfig& cfg)
{
    std::vector<LocalizedObject> objects;
    const DetectionMap prepared = prepare_detections(detections, dataset, cfg.matching);

    std::vector<TrackMember> nodes;
    std::map<TrackMember, std::size_t> node_index;
    std::map<TrackMember, const Detection*> node_det;
    for (const auto& [image_id, dets] : prepared) {
        for (const auto& d : dets) {
            TrackMember m{image_id, d.local_id};
            node_index.emplace(m, nodes.size());
            node_det.emplace(m, &d);
            nodes.push_back(m);
        }
    }

    DisjointSets sets;
    sets.parent.resize(nodes.size());
    std::iota(sets.parent.begin(), sets.parent.end(), 0);
    for (const auto& n : nodes) sets.images.push_back({n.image_id});

    using Edge = std::tuple<double, TrackMember, TrackMember>;
    std::vector<Edge> edges;
    for (const auto& pm : matches) {
        for (const auto& p : pm.result.pairs) {
            TrackMember a{pm.x_image, p.det_x_local_id};
            TrackMember b{pm.y_image, p.det_y_local_id};
            for (const auto& m : {a, b}) {
                if (!node_index.contains(m)) {
                    throw Error(ErrorCode::IntegrityError, "match references unknown detection " + m.image_id + "#" +
                                                               std::to_string(m.local_id));
                }
            }
            edges.emplace_back(p.cost, std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    for (const auto& [cost, a, b] : edges) {
        const std::size_t ra = sets.find(node_index.at(a));
        const std::size_t rb = sets.find(node_index.at(b));
        if (ra == rb) continue;
        const auto& ia = sets.images[ra];
        const auto& ib = sets.images[rb];
        const bool conflict = std::any_of(ib.begin(), ib.end(), [&](const std::string& s) { return ia.contains(s); });
        if (conflict) continue;
        sets.parent[rb] = ra;
        sets.images[ra].insert(ib.begin(), ib.end());
        sets.images[rb].clear();
    }

    std::map<std::size_t, std::vector<TrackMember>> components;
    for (std::size_t i = 0; i < nodes.size(); ++i) components[sets.find(i)].push_back(nodes[i]);
    std::vector<std::vector<TrackMember>> tracks;
    for (auto& [root, members] : components) {
        std::sort(members.begin(), members.end());
        tracks.push_back(std::move(members));
    }
    std::sort(tracks.begin(), tracks.end());

    for (std::size_t t = 0; t < tracks.size(); ++t) {
        LocalizedObject obj;
        obj.track_id = t;
        obj.members = tracks[t];
        obj.n_views = tracks[t].size();

        std::vector<Observation> obs;
        std::vector<const Detection*> obs_det;
        for (const auto& m : tracks[t]) {
            const auto it = dataset.images.find(m.image_id);
            if (it == dataset.images.end()) continue;
            const Detection* d = node_det.at(m);
            const PixelPoint foot = d->box.footpoint(static_cast<double>(it->second.pano.width_px));
            obs.push_back({it->second.camera, foot, it->second.pano, d->score});
            obs_det.push_back(d);
        }
        if (obs.empty()) {
            obj.error = "no camera for image '" + tracks[t].front().image_id + "'";
            objects.push_back(std::move(obj));
            continue;
        }
        if (obs.size() >= 2) {
            try {
                const auto tri = triangulate(obs);
                obj.geo = tri.geo;
                obj.residual_m = tri.residual_m;
                obj.method = LocalizationMethod::Triangulated;
            } catch (const Error& e) {
                obj.error = e.what();
            }
        }
        if (!obj.geo) {
            obj.fallback = true;
            std::size_t best = 0;
            for (std::size_t k = 1; k < obs.size(); ++k) {
                if (obs[k].weight > obs[best].weight) best = k;
            }
            try {
                obj.geo = geo_from_pixel(obs[best].camera, obs[best].pixel, obs[best].pano);
                obj.method = LocalizationMethod::SingleView;
            } catch (const Error& e) {
                obj.method = LocalizationMethod::Failed;
                obj.error = e.what();
            }
        }
        objects.push_back(std::move(obj));
    }
    return objects;
}

}  // namespace mvgeo
