#include "mvgeo/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mvgeo/error.hpp"
#include "mvgeo/matching.hpp"

namespace mvgeo {

void LossConfig::validate() const
{
    if (!(alpha > 0.0)) throw Error(ErrorCode::ConfigError, "alpha must be positive");
    if (!(margin > 0.0)) throw Error(ErrorCode::ConfigError, "margin must be positive");
}

namespace {

void check_lengths(std::size_t a, std::size_t b)
{
    if (a != b) {
        throw Error(ErrorCode::LengthMismatch, "lengths " + std::to_string(a) + " and " + std::to_string(b));
    }
}

std::vector<double> softmax(std::span<const double> logits, std::size_t true_class)
{
    if (logits.size() < 2 || true_class >= logits.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "class " + std::to_string(true_class) + " of " +
                                                    std::to_string(logits.size()) + " logits");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

std::array<double, 4> corners(const BoundingBox& b) noexcept
{
    return {b.x_min, b.y_min, b.x_max, b.y_max};
}

}  // namespace

double softmax_log_loss(std::span<const double> logits, std::size_t true_class)
{
    softmax(logits, true_class);  // validates
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    return std::max(0.0, std::log(sum) - (logits[true_class] - mx));
}

std::vector<double> softmax_log_loss_gradient(std::span<const double> logits, std::size_t true_class)
{
    std::vector<double> g = softmax(logits, true_class);
    g[true_class] -= 1.0;
    return g;
}

double smooth_l1(std::span<const double> pred, std::span<const double> target)
{
    check_lengths(pred.size(), target.size());
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = std::abs(pred[i] - target[i]);
        s += d < 1.0 ? 0.5 * d * d : d - 0.5;
    }
    return s;
}

std::vector<double> smooth_l1_gradient(std::span<const double> pred, std::span<const double> target)
{
    check_lengths(pred.size(), target.size());
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        g[i] = std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
    }
    return g;
}

double smooth_l1(const BoundingBox& pred, const BoundingBox& target) noexcept
{
    const auto p = corners(pred);
    const auto t = corners(target);
    return smooth_l1(std::span<const double>(p), std::span<const double>(t));
}

double projected_loc_loss(std::span<const BoundingBox> pred_boxes, std::span<const BoundingBox> projected,
                          std::span<const GroundTruthBox> gt, std::span<const GroundTruthBox> gt_other)
{
    check_lengths(pred_boxes.size(), projected.size());
    const auto f_g = filter_identified(gt);
    const auto f_g_other = filter_identified(gt_other);
    double total = 0.0;
    for (const auto& [p, g] : match_boxes_iou(pred_boxes, f_g)) {
        const auto it = std::find_if(f_g_other.begin(), f_g_other.end(), [&](const GroundTruthBox& o) {
            return o.instance_id == f_g[g].instance_id;
        });
        if (it == f_g_other.end()) continue;
        total += smooth_l1(projected[p], it->box);
    }
    return total;
}

double contrastive_loss(std::span<const double> f1, std::span<const double> f2, bool same, double margin)
{
    check_lengths(f1.size(), f2.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) sq += (f1[i] - f2[i]) * (f1[i] - f2[i]);
    if (same) return 0.5 * sq;
    const double gap = std::max(0.0, margin - std::sqrt(sq));
    return 0.5 * gap * gap;
}

std::vector<double> contrastive_loss_gradient(std::span<const double> f1, std::span<const double> f2, bool same,
                                              double margin)
{
    check_lengths(f1.size(), f2.size());
    std::vector<double> g(f1.size(), 0.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) sq += (f1[i] - f2[i]) * (f1[i] - f2[i]);
    const double d = std::sqrt(sq);
    if (same) {
        for (std::size_t i = 0; i < f1.size(); ++i) g[i] = f1[i] - f2[i];
    } else if (d < margin && d > 0.0) {
        const double k = -(margin - d) / d;
        for (std::size_t i = 0; i < f1.size(); ++i) g[i] = k * (f1[i] - f2[i]);
    }
    return g;
}

double rmse_loss(std::span<const GeoCoordinate> pred, std::span<const GeoCoordinate> gt)
{
    check_lengths(pred.size(), gt.size());
    if (pred.empty()) throw Error(ErrorCode::EmptyInput, "rmse over zero coordinates");
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = haversine_distance(pred[i], gt[i]);
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(pred.size()));
}

LossBreakdown combined_loss(const LossInputs& in, const LossConfig& cfg)
{
    cfg.validate();
    LossBreakdown out;
    for (const auto& c : in.classification) out.conf += softmax_log_loss(c.logits, c.true_class);
    for (const auto& [p, g] : in.localization) out.loc += smooth_l1(p, g);
    out.loc_proj = projected_loc_loss(in.pred_boxes, in.projected_boxes, in.gt, in.gt_other);
    for (const auto& fp : in.feature_pairs) out.cont += contrastive_loss(fp.f1, fp.f2, fp.same, cfg.margin);
    check_lengths(in.pred_geo.size(), in.gt_geo.size());
    if (!in.pred_geo.empty()) out.rmse = rmse_loss(in.pred_geo, in.gt_geo);
    out.n_matched = in.n_matched;
    if (in.n_matched == 0) {
        out.degenerate = true;
        out.total = 0.0;
        return out;
    }
    out.total = (out.conf + cfg.alpha * out.loc + cfg.alpha * out.loc_proj + out.cont + out.rmse) /
                static_cast<double>(in.n_matched);
    return out;
}

}  // namespace mvgeo
