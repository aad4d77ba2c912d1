#pragma once

// Evaluation: VOC-style detection mAP, cross-view re-identification
// accuracy and geo-localization mean absolute error.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvgeo/matching.hpp"
#include "mvgeo/types.hpp"

namespace mvgeo {

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct ClassEval {
    int class_label = 0;
    double ap = 0.0;
    std::size_t n_gt = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::vector<PrPoint> pr_curve;
};

struct DetectionEval {
    double map = 0.0;
    std::vector<ClassEval> per_class;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t n_gt = 0;
};

/// Ground-truth boxes per image keyed by image id.
using GroundTruthMap = std::map<std::string, std::vector<GroundTruthBox>>;

GroundTruthMap ground_truth_of(const SceneDataset& dataset);

/// Per-class AP with all-point interpolation, averaged over classes that
/// have ground truth. Detections are ranked by descending score, equal
/// scores by (image id, local id); each goes to its highest-IoU box, and is
/// a true positive when that IoU reaches the threshold and the box is still
/// free.
DetectionEval detection_map(const DetectionMap& preds, const GroundTruthMap& gts, double iou_threshold = 0.5);

/// One evaluated image pair: the two records, the detections that were
/// matched (after any filtering) and the matching result.
struct PairEvaluation {
    const ImageRecord* x = nullptr;
    const ImageRecord* y = nullptr;
    std::vector<Detection> dets_x;
    std::vector<Detection> dets_y;
    MatchingResult result;
};

struct ReidEval {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t co_visible = 0;
};

/// Fraction of identities visible in both images of an evaluated pair whose
/// two boxes are linked by a match. A detection stands for the identified
/// box it overlaps most, provided that IoU reaches min_iou.
ReidEval reid_accuracy(std::span<const PairEvaluation> pairs, double min_iou = 0.5);

struct MaeEval {
    double mae_m = 0.0;
    std::size_t matched = 0;
    std::size_t predictions = 0;
    double coverage = 0.0;     ///< matched / predictions
    double gt_coverage = 0.0;  ///< ground-truth objects with at least one matched prediction
};

inline constexpr double kMaeGateM = 20.0;

/// Mean great-circle error of predictions matched to their nearest ground
/// truth within the gate. Throws Error(EmptyInput) when nothing matches.
MaeEval geolocalization_mae(std::span<const GeoCoordinate> preds, std::span<const GeoCoordinate> gt,
                            double gate_m = kMaeGateM);

struct EvalReport {
    std::optional<DetectionEval> detection;
    std::optional<ReidEval> reid;
    std::optional<MaeEval> mae;
};

/// Plain-text summary table, one row per metric.
std::string format_report_table(const EvalReport& report);

}  // namespace mvgeo
