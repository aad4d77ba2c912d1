#include "mvgeo/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "mvgeo/error.hpp"

namespace mvgeo {

void MatchingConfig::validate() const
{
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(conf_threshold)) throw Error(ErrorCode::ConfigError, "conf_threshold must lie in [0, 1]");
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw Error(ErrorCode::ConfigError, "nms_iou must lie in (0, 1]");
    if (!in_unit(gate_iou)) throw Error(ErrorCode::ConfigError, "gate_iou must lie in [0, 1]");
    if (!in_unit(feature_weight)) throw Error(ErrorCode::ConfigError, "feature_weight must lie in [0, 1]");
}

namespace {

double interval_overlap(double a0, double a1, double b0, double b1) noexcept
{
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b, std::optional<double> wrap_width) noexcept
{
    const double area_a = a.area();
    const double area_b = b.area();
    if (!(area_a > 0.0) || !(area_b > 0.0)) return 0.0;
    double ix = interval_overlap(a.x_min, a.x_max, b.x_min, b.x_max);
    if (wrap_width && *wrap_width > 0.0) {
        const double w = *wrap_width;
        ix += interval_overlap(a.x_min, a.x_max, b.x_min + w, b.x_max + w);
        ix += interval_overlap(a.x_min, a.x_max, b.x_min - w, b.x_max - w);
        ix = std::min(ix, std::min(a.width(), b.width()));
    }
    const double iy = interval_overlap(a.y_min, a.y_max, b.y_min, b.y_max);
    const double inter = ix * iy;
    if (inter <= 0.0) return 0.0;
    return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

std::vector<Detection> filter_candidates(std::span<const Detection> dets, const MatchingConfig& cfg)
{
    std::vector<Detection> out;
    std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
                 [&](const Detection& d) { return d.score >= cfg.conf_threshold; });
    return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, std::optional<double> wrap_width)
{
    std::vector<Detection> sorted(dets.begin(), dets.end());
    std::sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.local_id < b.local_id;
    });
    std::vector<Detection> kept;
    for (auto& d : sorted) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return iou(k.box, d.box, wrap_width) > iou_threshold;
        });
        if (!suppressed) kept.push_back(std::move(d));
    }
    return kept;
}

ProjectedBox project_box(const BoundingBox& box, const CameraPose& cam_src, const CameraPose& cam_dst,
                         const PanoramaGeometry& pano_src, const PanoramaGeometry& pano_dst)
{
    const PixelPoint foot = box.footpoint(static_cast<double>(pano_src.width_px));
    const GeoCoordinate ground = geo_from_pixel(cam_src, foot, pano_src);
    const double z_src = ground_distance(enu_from_geo(cam_src, ground));
    const PixelPoint dst = pixel_from_geo(cam_dst, ground, pano_dst);
    const double z_dst = ground_distance(enu_from_geo(cam_dst, ground));

    const double scale = z_src / z_dst;
    const double w_dst = pano_dst.width_px;
    const double h_dst = pano_dst.height_px;
    const double width =
        std::min(box.width() * scale * w_dst / pano_src.width_px, w_dst);
    const double height = box.height() * scale * h_dst / pano_src.height_px;

    ProjectedBox out;
    out.z_src = z_src;
    out.z_dst = z_dst;
    out.box.x_min = dst.x - 0.5 * width;
    if (out.box.x_min < 0.0) out.box.x_min += w_dst;
    out.box.x_max = out.box.x_min + width;
    out.box.y_max = std::min(dst.y, h_dst);
    out.box.y_min = std::max(0.0, out.box.y_max - height);
    return out;
}

BoundingBox project_detection(const Detection& det, const CameraPose& cam_src, const CameraPose& cam_dst,
                              const PanoramaGeometry& pano_src, const PanoramaGeometry& pano_dst)
{
    return project_box(det.box, cam_src, cam_dst, pano_src, pano_dst).box;
}

double feature_distance(const FeatureVector& a, const FeatureVector& b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorCode::FeatureDimMismatch,
                    "feature lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

std::vector<std::optional<BoundingBox>> project_all(std::span<const Detection> dets, const ViewInput& src,
                                                    const ViewInput& dst)
{
    std::vector<std::optional<BoundingBox>> out;
    out.reserve(dets.size());
    for (const auto& d : dets) {
        try {
            out.emplace_back(project_detection(d, src.camera, dst.camera, src.pano, dst.pano));
        } catch (const Error&) {
            // footpoint above the horizon or under the other camera: no projection
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

// Leaving a detection unmatched costs half the largest pair cost, so the
// optimum maximizes the summed affinity 1 - cost instead of the number of
// pairs; a zero-cost pair is never traded for two poorer ones.
std::vector<std::pair<std::size_t, std::size_t>> assign_partial(const CostMatrix& costs, AssignmentMode mode)
{
    if (mode == AssignmentMode::Greedy) return assign(costs, mode);
    const std::size_t n = costs.rows;
    const std::size_t m = costs.cols;
    CostMatrix big(n + m, m + n, kInfeasible);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) big(i, j) = costs(i, j);
        big(i, m + i) = 0.5;
    }
    for (std::size_t j = 0; j < m; ++j) {
        big(n + j, j) = 0.5;
        for (std::size_t i = 0; i < n; ++i) big(n + j, m + i) = 0.0;
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& [i, j] : assign(big, mode)) {
        if (i < n && j < m) out.emplace_back(i, j);
    }
    return out;
}

}  // namespace

MatchingResult cross_view_match(const ViewInput& x_in, const ViewInput& y_in, const MatchingConfig& cfg)
{
    cfg.validate();
    std::vector<Detection> xs(x_in.detections.begin(), x_in.detections.end());
    std::vector<Detection> ys(y_in.detections.begin(), y_in.detections.end());
    if (cfg.apply_filters) {
        xs = nms(filter_candidates(xs, cfg), cfg.nms_iou, static_cast<double>(x_in.pano.width_px));
        ys = nms(filter_candidates(ys, cfg), cfg.nms_iou, static_cast<double>(y_in.pano.width_px));
    }
    const ViewInput x{xs, x_in.camera, x_in.pano};
    const ViewInput y{ys, y_in.camera, y_in.pano};

    const bool use_xy = cfg.overlap_direction != OverlapDirection::YToX;
    const bool use_yx = cfg.overlap_direction != OverlapDirection::XToY;
    const auto proj_xy = use_xy ? project_all(xs, x, y) : std::vector<std::optional<BoundingBox>>(xs.size());
    const auto proj_yx = use_yx ? project_all(ys, y, x) : std::vector<std::optional<BoundingBox>>(ys.size());
    const double wx = x.pano.width_px;
    const double wy = y.pano.width_px;

    const std::size_t n = xs.size();
    const std::size_t m = ys.size();
    CostMatrix costs(n, m, kInfeasible);
    std::vector<double> overlaps(n * m, 0.0);
    std::vector<double> fdists(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double overlap = 0.0;
            if (proj_xy[i]) overlap = std::max(overlap, iou(*proj_xy[i], ys[j].box, wy));
            if (proj_yx[j]) overlap = std::max(overlap, iou(xs[i].box, *proj_yx[j], wx));
            double cost = 1.0 - overlap;
            double fdist = 0.0;
            if (xs[i].feature && ys[j].feature) {
                fdist = feature_distance(*xs[i].feature, *ys[j].feature);
                cost = cfg.feature_weight * (fdist / (1.0 + fdist)) + (1.0 - cfg.feature_weight) * (1.0 - overlap);
            }
            overlaps[i * m + j] = overlap;
            fdists[i * m + j] = fdist;
            if (overlap >= cfg.gate_iou) costs(i, j) = cost;
        }
    }

    MatchingResult result;
    std::vector<bool> x_used(n, false);
    std::vector<bool> y_used(m, false);
    for (const auto& [i, j] : assign_partial(costs, cfg.assignment_mode)) {
        result.pairs.push_back({xs[i].local_id, ys[j].local_id, overlaps[i * m + j], fdists[i * m + j], costs(i, j)});
        x_used[i] = true;
        y_used[j] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!x_used[i]) result.unmatched_x.push_back(xs[i].local_id);
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (!y_used[j]) result.unmatched_y.push_back(ys[j].local_id);
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const MatchPair& a, const MatchPair& b) { return a.det_x_local_id < b.det_x_local_id; });
    std::sort(result.unmatched_x.begin(), result.unmatched_x.end());
    std::sort(result.unmatched_y.begin(), result.unmatched_y.end());
    return result;
}

std::vector<GroundTruthBox> filter_identified(std::span<const GroundTruthBox> gt)
{
    std::vector<GroundTruthBox> out;
    std::copy_if(gt.begin(), gt.end(), std::back_inserter(out),
                 [](const GroundTruthBox& g) { return g.instance_id.has_value(); });
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> match_boxes_iou(std::span<const BoundingBox> preds,
                                                                 std::span<const GroundTruthBox> gts,
                                                                 double min_iou)
{
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const double v = iou(preds[p], gts[g].box);
            if (v >= min_iou) candidates.emplace_back(v, p, g);
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    std::vector<bool> p_used(preds.size(), false);
    std::vector<bool> g_used(gts.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& [v, p, g] : candidates) {
        if (p_used[p] || g_used[g]) continue;
        p_used[p] = g_used[g] = true;
        out.emplace_back(p, g);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mvgeo
