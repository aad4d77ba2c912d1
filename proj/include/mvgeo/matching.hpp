#pragma once

// Candidate filtering and cross-view instance matching.
//
// Two views are matched by projecting every detection into the other view
// through the ground plane, gating pairs on projected overlap, and solving
// a one-to-one assignment on a cost that mixes overlap and appearance.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mvgeo/types.hpp"

namespace mvgeo {

enum class AssignmentMode { Optimal, Greedy };

/// Which projection directions feed the overlap score of a pair.
enum class OverlapDirection { Both, XToY, YToX };

struct MatchingConfig {
    double conf_threshold = 0.01;
    double nms_iou = 0.5;
    double gate_iou = 0.1;
    /// Weight of the appearance term; 0 is geometry only, 1 appearance only.
    double feature_weight = 0.5;
    AssignmentMode assignment_mode = AssignmentMode::Optimal;
    OverlapDirection overlap_direction = OverlapDirection::Both;
    /// Run filter_candidates and nms on both inputs before matching.
    bool apply_filters = false;

    /// Throws Error(ConfigError) when a field leaves its range.
    void validate() const;
};

struct MatchPair {
    int det_x_local_id = 0;
    int det_y_local_id = 0;
    double projected_iou = 0.0;
    double feature_dist = 0.0;
    double cost = 0.0;
};

struct MatchingResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_x;
    std::vector<int> unmatched_y;
};

/// Intersection over union. With wrap_width the boxes live on a cylinder of
/// that circumference, so a box crossing the seam overlaps boxes on both sides.
double iou(const BoundingBox& a, const BoundingBox& b, std::optional<double> wrap_width = std::nullopt) noexcept;

/// Keeps detections with score >= threshold, in input order.
std::vector<Detection> filter_candidates(std::span<const Detection> dets, const MatchingConfig& cfg);

/// Greedy non-maximum suppression. Output is sorted by descending score,
/// equal scores ordered by ascending local id, so the result does not depend
/// on input order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           std::optional<double> wrap_width = std::nullopt);

struct ProjectedBox {
    BoundingBox box;
    double z_src = 0.0;  ///< ground distance from the source camera
    double z_dst = 0.0;  ///< ground distance from the destination camera
};

/// Transfers a box between views through its footpoint. The footpoint is
/// lifted to the ground with the flat-terrain inverse and re-projected into
/// the destination; width and height scale by z_src / z_dst and by the
/// resolution ratio of the two panoramas. The result is wrapped so that
/// x_min lies in [0, W) and clamped vertically to the destination image.
/// Throws Error(AboveHorizon) when the source footpoint is not below the
/// horizon and Error(DegenerateTarget) when the ground point sits under the
/// destination camera.
ProjectedBox project_box(const BoundingBox& box, const CameraPose& cam_src, const CameraPose& cam_dst,
                         const PanoramaGeometry& pano_src, const PanoramaGeometry& pano_dst);

BoundingBox project_detection(const Detection& det, const CameraPose& cam_src, const CameraPose& cam_dst,
                              const PanoramaGeometry& pano_src, const PanoramaGeometry& pano_dst);

struct ViewInput {
    std::span<const Detection> detections;
    CameraPose camera;
    PanoramaGeometry pano;
};

/// Euclidean distance between two appearance vectors.
/// Throws Error(FeatureDimMismatch) on unequal lengths.
double feature_distance(const FeatureVector& a, const FeatureVector& b);

/// One-to-one matching of two views. Pairs whose projected overlap falls
/// below gate_iou are infeasible. The cost of a feasible pair is
///   feature_weight * d / (1 + d) + (1 - feature_weight) * (1 - overlap)
/// with d the feature distance; when either detection lacks a feature the
/// appearance term is dropped and the cost is 1 - overlap.
MatchingResult cross_view_match(const ViewInput& x, const ViewInput& y, const MatchingConfig& cfg);

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// Rectangular cost matrix, row-major.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Solves the assignment problem. Infinite entries are forbidden pairs.
///
/// Optimal mode maximizes the number of assigned pairs first and then
/// minimizes their total cost (Hungarian method with potentials, O(n^2 m)).
/// Greedy mode repeatedly takes the smallest remaining finite entry, ties
/// going to the lower (row, col). Returned pairs are sorted by row.
std::vector<std::pair<std::size_t, std::size_t>> assign(const CostMatrix& costs, AssignmentMode mode);

/// Keeps boxes that carry an instance id.
std::vector<GroundTruthBox> filter_identified(std::span<const GroundTruthBox> gt);

/// Greedy one-to-one pairing by descending IoU with a floor of min_iou.
/// Returned (pred_idx, gt_idx) pairs are sorted by prediction index.
std::vector<std::pair<std::size_t, std::size_t>> match_boxes_iou(std::span<const BoundingBox> preds,
                                                                 std::span<const GroundTruthBox> gts,
                                                                 double min_iou = 0.5);

}  // namespace mvgeo
