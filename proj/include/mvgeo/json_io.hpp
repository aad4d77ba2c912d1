#pragma once

// nlohmann::json conversions for the core value types. Shared by the
// dataset loaders, the CLI and the annotation service so every consumer
// reads and writes one schema.

#include "json.hpp"

#include "mvgeo/types.hpp"

namespace mvgeo {

using json = nlohmann::json;

void to_json(json& j, const GeoCoordinate& g);
void from_json(const json& j, GeoCoordinate& g);

/// Boxes travel as [x_min, y_min, x_max, y_max].
json box_to_array(const BoundingBox& box);
BoundingBox box_from_array(const json& j);

void to_json(json& j, const Detection& d);

json image_record_to_json(const ImageRecord& record);
ImageRecord image_record_from_json(const json& j);

json identity_to_json(const Identity& identity);
Identity identity_from_json(const json& j);

/// Serializes with sorted keys and a trailing newline.
std::string dump_stable(const json& j, int indent = 2);

}  // namespace mvgeo
