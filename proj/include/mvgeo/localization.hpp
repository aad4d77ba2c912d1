#pragma once

// Object geo-localization from one or more views.
//
// Single view: the box footpoint is intersected with the flat ground plane.
// Multi view: bearing rays are intersected in a local tangent plane by
// weighted least squares, then refined with Gauss-Newton against the exact
// per-camera projection model.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgeo/matching.hpp"
#include "mvgeo/types.hpp"

namespace mvgeo {

struct Observation {
    CameraPose camera;
    PixelPoint pixel;  ///< box footpoint
    PanoramaGeometry pano;
    double weight = 1.0;
};

/// Flat-terrain position of the detection's footpoint.
GeoCoordinate localize_single(const Detection& det, const CameraPose& camera, const PanoramaGeometry& pano);

struct TriangulationResult {
    GeoCoordinate geo;
    /// Weighted RMS of the perpendicular distances from the estimate to each
    /// bearing ray, meters.
    double residual_m = 0.0;
    std::size_t n_views = 0;
};

/// Minimum angle between two bearing lines for the intersection to be
/// considered well conditioned.
inline constexpr double kMinBearingSpreadDeg = 2.0;

/// Throws Error(InsufficientData) for fewer than two observations and
/// Error(DegenerateBearings) when every pair of rays is within 2 degrees of
/// parallel or the rays meet behind the cameras.
TriangulationResult triangulate(std::span<const Observation> obs);

/// Per-axis affine correction of projected boxes: on each axis the box
/// center and extent each get an offset and a gain.
struct AxisCorrection {
    double center_offset = 0.0;
    double center_gain = 1.0;
    double extent_offset = 0.0;
    double extent_gain = 1.0;
};

struct ProjectionCorrection {
    AxisCorrection x;
    AxisCorrection y;
    double rms_before = 0.0;  ///< RMS corner residual of the raw projections
    double rms_after = 0.0;   ///< same after correction
    std::size_t n_pairs = 0;

    BoundingBox apply(const BoundingBox& projected) const noexcept;
    bool is_identity(double tol = 1e-9) const noexcept;
};

inline constexpr std::size_t kMinCorrectionPairs = 8;

/// Least-squares fit over (projected box, ground-truth box) pairs.
/// Throws Error(InsufficientData) below eight pairs.
ProjectionCorrection fit_projection_correction(std::span<const std::pair<BoundingBox, BoundingBox>> train_pairs);

/// RMS distance over the four box corners.
double rms_corner_residual(std::span<const std::pair<BoundingBox, BoundingBox>> pairs) noexcept;

struct PipelineConfig {
    MatchingConfig matching;
    /// Worker threads for pairwise matching; results do not depend on it.
    unsigned jobs = 1;
};

struct TrackMember {
    std::string image_id;
    int local_id = 0;

    friend auto operator<=>(const TrackMember&, const TrackMember&) = default;
};

enum class LocalizationMethod { Triangulated, SingleView, Failed };

struct LocalizedObject {
    std::size_t track_id = 0;
    std::optional<GeoCoordinate> geo;
    std::size_t n_views = 0;
    double residual_m = 0.0;
    LocalizationMethod method = LocalizationMethod::Failed;
    /// Set when a multi-view track fell back to a single view, or the track
    /// only ever had one view.
    bool fallback = false;
    std::vector<TrackMember> members;
    std::string error;
};

struct ImagePairMatch {
    std::string x_image;
    std::string y_image;
    MatchingResult result;
};

struct PipelineOutput {
    std::vector<ImagePairMatch> matches;
    std::vector<LocalizedObject> objects;
};

/// Matches every neighboring image pair, links pairwise matches into tracks
/// (strongest edges first, never two detections of one image in a track),
/// and localizes each track. Failures are recorded per object.
PipelineOutput localize_pipeline(const SceneDataset& dataset, const DetectionMap& detections,
                                 const PipelineConfig& cfg);

/// The track and localization half of localize_pipeline, over matches
/// computed earlier. Throws Error(IntegrityError) when a match names a
/// detection that is not in the map.
std::vector<LocalizedObject> localize_tracks(const SceneDataset& dataset, const DetectionMap& detections,
                                             std::span<const ImagePairMatch> matches, const PipelineConfig& cfg);

/// Neighbor pairs (a < b) that both have detections, in sorted order.
std::vector<std::pair<std::string, std::string>> neighbor_pairs(const SceneDataset& dataset,
                                                                const DetectionMap& detections);

/// Matches all neighbor pairs; deterministic for any number of jobs.
std::vector<ImagePairMatch> match_all_pairs(const SceneDataset& dataset, const DetectionMap& detections,
                                            const PipelineConfig& cfg);

/// Every detection localized on its own, the single-view baseline.
std::vector<GeoCoordinate> localize_all_single(const SceneDataset& dataset, const DetectionMap& detections,
                                               const MatchingConfig& cfg);

std::string_view to_string(LocalizationMethod method) noexcept;

}  // namespace mvgeo
