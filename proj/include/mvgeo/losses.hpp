#pragma once

// The multi-task training objective as plain numeric functions: class
// confidence, box regression, regression of projected boxes onto the other
// view's identified boxes, appearance contrastive term and geo RMSE.
// Boxes are regressed in corner coordinates.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgeo/types.hpp"

namespace mvgeo {

struct LossConfig {
    double alpha = 1.0;   ///< weight of both localization terms
    double margin = 1.0;  ///< contrastive margin

    void validate() const;
};

struct LossBreakdown {
    double conf = 0.0;
    double loc = 0.0;
    double loc_proj = 0.0;
    double cont = 0.0;
    double rmse = 0.0;
    double total = 0.0;
    std::size_t n_matched = 0;
    /// Set when n_matched was zero and total was defined as 0.
    bool degenerate = false;
};

/// -log softmax(logits)[true_class], stabilized by max subtraction.
/// Throws Error(IndexOutOfRange) for a bad class or fewer than two logits.
double softmax_log_loss(std::span<const double> logits, std::size_t true_class);
std::vector<double> softmax_log_loss_gradient(std::span<const double> logits, std::size_t true_class);

/// Sum over coordinates of 0.5 d^2 (|d| < 1) or |d| - 0.5.
/// Throws Error(LengthMismatch).
double smooth_l1(std::span<const double> pred, std::span<const double> target);
std::vector<double> smooth_l1_gradient(std::span<const double> pred, std::span<const double> target);

double smooth_l1(const BoundingBox& pred, const BoundingBox& target) noexcept;

/// Regression of projected predictions onto the other view's boxes. Ground
/// truth of both views is reduced to identified boxes, predictions are
/// matched to this view's identified boxes by IoU, and each matched
/// prediction's projection is compared with the box of the same identity in
/// the other view. Returns 0 when nothing matches.
double projected_loc_loss(std::span<const BoundingBox> pred_boxes, std::span<const BoundingBox> projected,
                          std::span<const GroundTruthBox> gt, std::span<const GroundTruthBox> gt_other);

/// Margin form: same -> 0.5 d^2, different -> 0.5 max(0, margin - d)^2.
double contrastive_loss(std::span<const double> f1, std::span<const double> f2, bool same, double margin);
/// Gradient with respect to f1.
std::vector<double> contrastive_loss_gradient(std::span<const double> f1, std::span<const double> f2, bool same,
                                              double margin);

/// Root mean squared great-circle distance, meters.
/// Throws Error(LengthMismatch) or Error(EmptyInput).
double rmse_loss(std::span<const GeoCoordinate> pred, std::span<const GeoCoordinate> gt);

struct ClassificationTerm {
    std::vector<double> logits;
    std::size_t true_class = 0;
};

struct FeaturePair {
    FeatureVector f1;
    FeatureVector f2;
    bool same = false;
};

struct LossInputs {
    std::vector<ClassificationTerm> classification;
    std::vector<std::pair<BoundingBox, BoundingBox>> localization;  ///< (prediction, ground truth)
    std::vector<BoundingBox> pred_boxes;
    std::vector<BoundingBox> projected_boxes;
    std::vector<GroundTruthBox> gt;
    std::vector<GroundTruthBox> gt_other;
    std::vector<FeaturePair> feature_pairs;
    std::vector<GeoCoordinate> pred_geo;
    std::vector<GeoCoordinate> gt_geo;
    std::size_t n_matched = 0;
};

/// (conf + alpha loc + alpha loc_proj + cont + rmse) / N.
LossBreakdown combined_loss(const LossInputs& inputs, const LossConfig& cfg);

}  // namespace mvgeo
