#pragma once

// Synthetic street scenes with known geometry: objects along a straight
// street, panoramas at regular spacing, boxes rendered through the
// projection model, and controllable pose, box, appearance and detection
// noise. Every emitted detection is traceable to its object (or to clutter)
// through the embedded correspondence oracle.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mvgeo/localization.hpp"
#include "mvgeo/metrics.hpp"
#include "mvgeo/types.hpp"

namespace mvgeo {

struct SimConfig {
    std::size_t n_objects = 50;
    double street_length_m = 300.0;
    double camera_spacing_m = 15.0;
    double lateral_offset_min_m = 4.0;
    double lateral_offset_max_m = 10.0;
    double camera_height_m = 2.5;
    double object_height_m = 6.0;
    double object_width_m = 3.0;
    double yaw_noise_deg = 0.0;
    double position_noise_m = 0.0;
    double bbox_jitter_px = 0.0;
    /// Height of each object's ground contact relative to the camera's ground
    /// plane (uneven terrain), meters.
    double terrain_noise_m = 0.0;
    double detection_dropout_p = 0.0;
    double clutter_rate = 0.0;  ///< expected false positives per image
    std::size_t feature_dim = 128;
    double feature_noise = 0.0;
    /// All objects share one appearance vector before noise.
    bool identical_features = false;
    std::size_t views_per_object = 4;
    GeoCoordinate origin{34.1478, -118.1445};
    double street_heading_deg = 0.0;
    PanoramaGeometry pano{2048, 1024};
    double min_object_separation_m = 3.0;
    std::uint64_t seed = 1;

    /// Throws Error(ConfigError) on out-of-range fields.
    void validate() const;
};

/// Owner of a detection: an object index, or nullopt for clutter.
using OracleMap = std::map<std::string, std::map<int, std::optional<std::size_t>>>;

struct SimScene {
    /// Dataset as a consumer would see it: noisy camera metadata, true
    /// boxes and true object positions.
    SceneDataset dataset;
    DetectionMap detections;
    std::map<std::string, CameraPose> true_cameras;
    std::vector<GeoCoordinate> object_geo;
    std::vector<InstanceId> object_ids;
    OracleMap oracle;
};

/// Deterministic in the seed: the same config yields byte-identical output
/// on every platform.
SimScene generate_scene(const SimConfig& cfg);

/// Serializes the scene: dataset layout, detections.json, oracle.json
/// (detection -> object id or null) and true_cameras.json.
void save_scene(const SimScene& scene, const std::filesystem::path& root);

/// Reid accuracy, MAE and coverage of the full pipeline on one scene.
struct SceneEvaluation {
    ReidEval reid;
    std::optional<MaeEval> triangulated;  ///< every pipeline output with a position
    std::optional<MaeEval> single_view;   ///< every detection localized on its own
    double detection_coverage = 0.0;
    std::size_t n_objects = 0;
};

SceneEvaluation evaluate_scene(const SimScene& scene, const PipelineConfig& cfg);

enum class SweepAxis { YawNoise, PositionNoise, BboxJitter, Dropout, FeatureWeight, FeatureNoise };

struct SweepRow {
    SweepAxis axis = SweepAxis::YawNoise;
    double value = 0.0;
    std::size_t seeds = 0;
    double reid_accuracy = 0.0;
    double mae_m = 0.0;
    double single_view_mae_m = 0.0;
    double detection_coverage = 0.0;  ///< ground-truth appearances that were detected
    double geo_coverage = 0.0;        ///< objects with a prediction inside the MAE gate
};

struct SweepSpec {
    SimConfig base;
    SweepAxis axis = SweepAxis::YawNoise;
    std::vector<double> values;
    std::size_t seeds = 20;
};

/// Seed-averaged metrics for each value on the swept axis. Seeds are
/// base.seed, base.seed + 1, ... so every value sees the same scenes.
std::vector<SweepRow> sweep(const SweepSpec& spec, const PipelineConfig& cfg);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

std::string_view to_string(SweepAxis axis) noexcept;
SweepAxis sweep_axis_from_string(std::string_view name);

/// Deterministic generator: std::mt19937_64 words (a fully specified
/// sequence) mapped to doubles by their top 53 bits, normals by Box-Muller,
/// Poisson by Knuth's product method. The standard distributions are not
/// used because their output is implementation-defined.
class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : engine_(seed) {}
    double uniform();                      ///< [0, 1)
    double uniform(double lo, double hi);  ///< [lo, hi)
    double normal(double mean, double stddev);
    std::size_t index(std::size_t n);      ///< [0, n)
    std::size_t poisson(double lambda);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace mvgeo
