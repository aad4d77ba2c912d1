#include "mvgeo/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include "mvgeo/error.hpp"

namespace mvgeo {

GroundTruthMap ground_truth_of(const SceneDataset& dataset)
{
    GroundTruthMap out;
    for (const auto& [id, record] : dataset.images) out[id] = record.ground_truth;
    return out;
}

namespace {

struct Ranked {
    double score;
    const std::string* image_id;
    int local_id;
    const BoundingBox* box;
};

double all_point_ap(std::vector<PrPoint>& curve)
{
    // precision envelope from the right, then area under the step function
    std::vector<double> prec(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) prec[i] = curve[i].precision;
    for (std::size_t i = curve.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        ap += (curve[i].recall - prev_recall) * prec[i];
        prev_recall = curve[i].recall;
    }
    return ap;
}

}  // namespace

DetectionEval detection_map(const DetectionMap& preds, const GroundTruthMap& gts, double iou_threshold)
{
    std::set<int> classes;
    for (const auto& [id, boxes] : gts) {
        for (const auto& g : boxes) classes.insert(g.class_label);
    }

    DetectionEval eval;
    for (int cls : classes) {
        ClassEval ce;
        ce.class_label = cls;
        std::map<std::string, std::vector<const GroundTruthBox*>> gt_by_image;
        for (const auto& [id, boxes] : gts) {
            for (const auto& g : boxes) {
                if (g.class_label == cls) gt_by_image[id].push_back(&g);
            }
        }
        for (const auto& [id, v] : gt_by_image) ce.n_gt += v.size();

        std::vector<Ranked> ranked;
        for (const auto& [id, dets] : preds) {
            for (const auto& d : dets) {
                if (d.class_label == cls) ranked.push_back({d.score, &id, d.local_id, &d.box});
            }
        }
        std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.score != b.score) return a.score > b.score;
            return std::tie(*a.image_id, a.local_id) < std::tie(*b.image_id, b.local_id);
        });

        std::map<const GroundTruthBox*, bool> taken;
        std::size_t tp = 0, fp = 0;
        for (const auto& r : ranked) {
            const GroundTruthBox* best = nullptr;
            double best_iou = -1.0;
            if (const auto it = gt_by_image.find(*r.image_id); it != gt_by_image.end()) {
                for (const auto* g : it->second) {
                    const double v = iou(*r.box, g->box);
                    if (v > best_iou) {
                        best_iou = v;
                        best = g;
                    }
                }
            }
            if (best && best_iou >= iou_threshold && !taken[best]) {
                taken[best] = true;
                ++tp;
            } else {
                ++fp;
            }
            if (ce.n_gt > 0) {
                ce.pr_curve.push_back({static_cast<double>(tp) / static_cast<double>(ce.n_gt),
                                       static_cast<double>(tp) / static_cast<double>(tp + fp)});
            }
        }
        ce.tp = tp;
        ce.fp = fp;
        ce.fn = ce.n_gt - tp;
        ce.ap = ce.n_gt > 0 ? all_point_ap(ce.pr_curve) : 0.0;
        eval.tp += ce.tp;
        eval.fp += ce.fp;
        eval.fn += ce.fn;
        eval.n_gt += ce.n_gt;
        eval.per_class.push_back(std::move(ce));
    }
    double sum = 0.0;
    for (const auto& ce : eval.per_class) sum += ce.ap;
    eval.map = eval.per_class.empty() ? 0.0 : sum / static_cast<double>(eval.per_class.size());
    return eval;
}

namespace {

// Instance id represented by each detection, if any.
std::map<int, InstanceId> identify(const std::vector<Detection>& dets, const ImageRecord& record, double min_iou)
{
    std::map<int, InstanceId> out;
    const double wrap = record.pano.width_px;
    for (const auto& d : dets) {
        double best = -1.0;
        const GroundTruthBox* best_gt = nullptr;
        for (const auto& g : record.ground_truth) {
            if (!g.instance_id) continue;
            const double v = iou(d.box, g.box, wrap);
            if (v > best) {
                best = v;
                best_gt = &g;
            }
        }
        if (best_gt && best >= min_iou) out[d.local_id] = *best_gt->instance_id;
    }
    return out;
}

std::set<InstanceId> identities_in(const ImageRecord& record)
{
    std::set<InstanceId> out;
    for (const auto& g : record.ground_truth) {
        if (g.instance_id) out.insert(*g.instance_id);
    }
    return out;
}

}  // namespace

ReidEval reid_accuracy(std::span<const PairEvaluation> pairs, double min_iou)
{
    ReidEval eval;
    for (const auto& pe : pairs) {
        if (!pe.x || !pe.y) continue;
        const auto ids_x = identities_in(*pe.x);
        const auto ids_y = identities_in(*pe.y);
        std::vector<InstanceId> co_visible;
        std::set_intersection(ids_x.begin(), ids_x.end(), ids_y.begin(), ids_y.end(), std::back_inserter(co_visible));
        eval.co_visible += co_visible.size();

        const auto lx = identify(pe.dets_x, *pe.x, min_iou);
        const auto ly = identify(pe.dets_y, *pe.y, min_iou);
        std::set<InstanceId> linked;
        for (const auto& p : pe.result.pairs) {
            const auto ix = lx.find(p.det_x_local_id);
            const auto iy = ly.find(p.det_y_local_id);
            if (ix != lx.end() && iy != ly.end() && ix->second == iy->second) linked.insert(ix->second);
        }
        for (const auto& id : co_visible) {
            if (linked.contains(id)) ++eval.correct;
        }
    }
    eval.accuracy = eval.co_visible > 0 ? static_cast<double>(eval.correct) / static_cast<double>(eval.co_visible) : 0.0;
    return eval;
}

MaeEval geolocalization_mae(std::span<const GeoCoordinate> preds, std::span<const GeoCoordinate> gt, double gate_m)
{
    MaeEval eval;
    eval.predictions = preds.size();
    std::vector<bool> gt_hit(gt.size(), false);
    double sum = 0.0;
    for (const auto& p : preds) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const double d = haversine_distance(p, gt[g]);
            if (d < best) {
                best = d;
                best_idx = g;
            }
        }
        if (best <= gate_m) {
            sum += best;
            ++eval.matched;
            gt_hit[best_idx] = true;
        }
    }
    if (eval.matched == 0) throw Error(ErrorCode::EmptyInput, "no prediction within the matching gate");
    eval.mae_m = sum / static_cast<double>(eval.matched);
    eval.coverage = static_cast<double>(eval.matched) / static_cast<double>(eval.predictions);
    eval.gt_coverage = gt.empty() ? 0.0
                                  : static_cast<double>(std::count(gt_hit.begin(), gt_hit.end(), true)) /
                                        static_cast<double>(gt.size());
    return eval;
}

std::string format_report_table(const EvalReport& report)
{
    auto fmt = [](const char* f, double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, f, v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "+----------------------+------------+\n";
    os << "| Metric               | Value      |\n";
    os << "+----------------------+------------+\n";
    auto row = [&](const std::string& name, const std::string& value) {
        os << "| " << name << std::string(21 - std::min<std::size_t>(21, name.size()), ' ') << "| " << value
           << std::string(11 - std::min<std::size_t>(11, value.size()), ' ') << "|\n";
    };
    if (report.detection) {
        row("Det. mAP", fmt("%.3f", report.detection->map));
        row("Det. TP / FP / FN", std::to_string(report.detection->tp) + "/" + std::to_string(report.detection->fp) +
                                     "/" + std::to_string(report.detection->fn));
    }
    if (report.reid) {
        row("Re-ID accuracy", fmt("%.3f", report.reid->accuracy));
        row("Re-ID correct/visible",
            std::to_string(report.reid->correct) + "/" + std::to_string(report.reid->co_visible));
    }
    if (report.mae) {
        row("MAE (m)", fmt("%.2f", report.mae->mae_m));
        row("Coverage", fmt("%.3f", report.mae->coverage));
        row("GT coverage", fmt("%.3f", report.mae->gt_coverage));
    }
    os << "+----------------------+------------+\n";
    return os.str();
}

}  // namespace mvgeo
