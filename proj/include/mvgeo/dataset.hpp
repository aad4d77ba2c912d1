#pragma once

// Ingestion, serialization and validation of scene datasets.
//
// Canonical on-disk layout (a dataset root):
//
//   images/{image_id}.jpg           optional, only served, never decoded
//   annotations/{image_id}.json     one record per image
//   identities.json                 [{instance_id, geo:{lat,lng}, appearances:[{image_id, box_index}]}]
//   splits.json                     {"train":[ids], "val":[ids], "test":[ids]}
//
// Annotation record:
//   {image_id, width, height, camera:{lat, lng, yaw_deg, height_m}, neighbors:[...],
//    boxes:[{x_min, y_min, x_max, y_max, label?, box_id?, instance_id?, geo?:{lat,lng},
//            distance_m?, heading_deg?}]}

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvgeo/types.hpp"

namespace mvgeo {

struct Violation {
    std::string kind;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    /// Non-fatal observations, e.g. a frame that is not 2:1 equirectangular.
    std::vector<std::string> warnings;

    bool ok() const noexcept { return violations.empty(); }
};

struct ValidationOptions {
    /// Upper bound on appearances per identity (4 for the street-tree data).
    std::optional<std::size_t> max_appearances;
};

ValidationReport validate(const SceneDataset& dataset, const ValidationOptions& options = {});

/// Loads the canonical layout. Throws ParseError (with the offending file)
/// or IntegrityError (validation failures, listed in the message).
SceneDataset load_pasadena(const std::filesystem::path& root, const ValidationOptions& options = {});

/// Relative path -> file content for the canonical layout. Output is
/// deterministic: keys sorted, numbers in shortest round-trip form.
std::map<std::string, std::string> pasadena_files(const SceneDataset& dataset);

void save_pasadena(const SceneDataset& dataset, const std::filesystem::path& root);

struct MapillaryOptions {
    PanoramaGeometry default_geometry{2048, 1024};
    double camera_height_m = 2.5;
    Split split = Split::Unassigned;
};

/// Converts a GeoJSON FeatureCollection of traffic-sign identities.
///
/// Each Point feature is one identity located at its geometry. Required
/// properties: `image_keys` (strings), `image_locations` ([lng, lat] per key)
/// and `polygons` (pixel polygon per key). Optional: `key` (instance id,
/// defaults to "feature-{index}"), `distances` (meters per key) or a scalar
/// `distance`, `altitude`, `image_sizes` ([w, h] per key), `image_yaws`
/// (degrees per key), `value` (class name, ignored).
SceneDataset parse_mapillary_geojson(const std::string& text, const MapillaryOptions& options = {});
SceneDataset load_mapillary_geojson(const std::filesystem::path& path, const MapillaryOptions& options = {});

/// Detection file: {image_id: [{box:[x_min,y_min,x_max,y_max], label, score,
/// local_id?, feature?:[...]}]}. Missing local ids are filled with the next
/// unused integer per image. When feature_dim is unset every feature in the
/// file must share the length of the first one seen.
DetectionMap parse_detections(const std::string& text, std::optional<std::size_t> feature_dim = std::nullopt);
DetectionMap load_detections(const std::filesystem::path& path,
                             std::optional<std::size_t> feature_dim = std::nullopt);
std::string detections_to_json(const DetectionMap& detections);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::string_view to_string(Split split) noexcept;

}  // namespace mvgeo
