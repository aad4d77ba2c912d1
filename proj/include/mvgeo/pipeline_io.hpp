#pragma once

// JSON forms of the pipeline's intermediate products, so every stage can be
// run separately and chained through files.

#include <string>
#include <vector>

#include "json.hpp"
#include "mvgeo/localization.hpp"
#include "mvgeo/metrics.hpp"

namespace mvgeo {

nlohmann::json matches_to_json(const std::vector<ImagePairMatch>& matches);
/// Throws Error(ParseError) on schema errors.
std::vector<ImagePairMatch> matches_from_json(const nlohmann::json& j);

nlohmann::json objects_to_json(const std::vector<LocalizedObject>& objects);
std::vector<LocalizedObject> objects_from_json(const nlohmann::json& j);
/// track_id,lat,lng,n_views,method,fallback,residual_m
std::string objects_to_csv(const std::vector<LocalizedObject>& objects);

nlohmann::json report_to_json(const EvalReport& report);
/// metric,value rows
std::string report_to_csv(const EvalReport& report);

}  // namespace mvgeo
