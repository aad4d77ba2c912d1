#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvgeo/geo.hpp"

namespace mvgeo {

/// Axis-aligned pixel box. A box that crosses the panorama seam keeps
/// x_min in [0, W) and lets x_max run past W; iou() with a wrap width
/// treats it as one contiguous region on the cylinder.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    bool well_ordered() const noexcept { return x_min < x_max && y_min < y_max; }

    /// Bottom-center pixel, the point assumed to touch the ground. When
    /// wrap_width is given the column is wrapped into [0, wrap_width).
    PixelPoint footpoint(std::optional<double> wrap_width = std::nullopt) const noexcept;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// True when the box fits the image, allowing the seam-crossing form.
bool box_within_image(const BoundingBox& box, const PanoramaGeometry& pano) noexcept;

using FeatureVector = std::vector<double>;

struct Detection {
    BoundingBox box;
    int class_label = 0;
    double score = 0.0;
    int local_id = 0;
    std::optional<FeatureVector> feature;
};

using InstanceId = std::string;

struct GroundTruthBox {
    BoundingBox box;
    int class_label = 0;
    std::optional<InstanceId> instance_id;
    std::optional<GeoCoordinate> geo;
    std::optional<double> distance_v;
    std::optional<double> heading_a;
    /// Stable handle used by the annotation store; empty when never assigned.
    std::string box_id;
    std::string author;
};

struct ImageRecord {
    std::string image_id;
    PanoramaGeometry pano;
    CameraPose camera;
    std::vector<std::string> neighbor_ids;
    std::vector<GroundTruthBox> ground_truth;
};

struct BoxRef {
    std::string image_id;
    std::size_t box_index = 0;

    friend bool operator==(const BoxRef&, const BoxRef&) = default;
};

struct Identity {
    InstanceId instance_id;
    GeoCoordinate geo;
    std::vector<BoxRef> appearances;
    std::optional<double> altitude_m;
    /// Annotation workflow state ("open" or "complete") when known.
    std::optional<std::string> status;
};

enum class Split { Unassigned, Train, Val, Test };

struct SceneDataset {
    std::map<std::string, ImageRecord> images;
    std::map<InstanceId, Identity> identities;
    std::map<std::string, Split> splits;

    std::size_t box_count() const noexcept;
    const ImageRecord& image(const std::string& image_id) const;
};

/// Per-image detections keyed by image id.
using DetectionMap = std::map<std::string, std::vector<Detection>>;

}  // namespace mvgeo
