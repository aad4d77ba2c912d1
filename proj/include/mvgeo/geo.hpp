#pragma once

// Geometric kernel: spherical-Earth local ENU frames, equirectangular
// panorama projection and its flat-terrain inverse, great-circle distance.
//
// All public angles are degrees. Internally everything is radians.

#include <numbers>

namespace mvgeo {

/// Earth radius used by both the local-frame conversion and the great-circle
/// distance, meters.
inline constexpr double kEarthRadiusM = 6'372'800.0;

inline constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 360).
double wrap_degrees(double deg) noexcept;

/// Wraps a longitude into [-180, 180).
double wrap_longitude(double deg) noexcept;

struct GeoCoordinate {
    double lat_deg = 0.0;
    double lng_deg = 0.0;

    friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

/// Validates latitude in [-90, 90] and normalizes longitude into [-180, 180).
/// Throws Error(InvalidCoordinate) on non-finite input or out-of-range latitude.
GeoCoordinate make_geo(double lat_deg, double lng_deg);

struct CameraPose {
    GeoCoordinate location;
    double yaw_deg = 0.0;   ///< clockwise from true north, [0, 360)
    double height_m = 2.5;  ///< above local ground, > 0

    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

/// Normalizes yaw into [0, 360); throws Error(InvalidCoordinate) if height <= 0.
CameraPose make_camera(GeoCoordinate location, double yaw_deg, double height_m);

struct EnuVector {
    double e_x = 0.0;  ///< east, meters
    double e_y = 0.0;  ///< north, meters
    double e_z = 0.0;  ///< up, meters
};

struct PanoramaGeometry {
    int width_px = 2048;
    int height_px = 1024;

    bool is_equirectangular() const noexcept { return width_px == 2 * height_px; }
    friend bool operator==(const PanoramaGeometry&, const PanoramaGeometry&) = default;
};

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

struct PoseFeatures {
    double v_m = 0.0;        ///< distance between the two cameras
    double a_src_deg = 0.0;  ///< in-panorama heading toward the object, source view
    double a_dst_deg = 0.0;  ///< same, destination view
};

/// Target position in the camera's local East-North-Up frame. e_z is the
/// negated camera height: the target is assumed to sit on flat ground.
EnuVector enu_from_geo(const CameraPose& camera, const GeoCoordinate& target) noexcept;

/// Exact inverse of enu_from_geo for the horizontal components.
/// Throws Error(InvalidCoordinate) when the offset leaves the domain of the
/// inverse (|e_y| > R or |e_x| > R cos(lat)).
GeoCoordinate geo_from_enu(const GeoCoordinate& origin, double e_x, double e_y);

/// Horizontal distance from the camera: sqrt(e_x^2 + e_y^2).
double ground_distance(const EnuVector& enu) noexcept;

/// Compass bearing of the target seen from the camera, radians in (-pi, pi].
double bearing_rad(const EnuVector& enu) noexcept;

/// Equirectangular pixel of a ground target. x is wrapped into [0, W).
/// Throws Error(DegenerateTarget) when the target is at the camera nadir.
PixelPoint pixel_from_geo(const CameraPose& camera, const GeoCoordinate& target,
                          const PanoramaGeometry& pano);

/// Ground point seen at a pixel, assuming flat terrain at camera height.
/// Throws Error(AboveHorizon) when y <= H/2 or the ray meets the ground
/// beyond the domain of the local-frame inverse.
GeoCoordinate geo_from_pixel(const CameraPose& camera, const PixelPoint& pixel,
                             const PanoramaGeometry& pano);

/// Compass bearing (radians) of the viewing ray through column x.
double bearing_from_column(const CameraPose& camera, double x, const PanoramaGeometry& pano) noexcept;

/// Great-circle distance, haversine form, meters.
double haversine_distance(const GeoCoordinate& a, const GeoCoordinate& b) noexcept;

/// In-panorama heading of column x, degrees in [0, 360).
double heading_from_column(double x, const PanoramaGeometry& pano) noexcept;

PoseFeatures relative_pose_features(const CameraPose& cam_a, const CameraPose& cam_b,
                                    const PixelPoint& pix_a, const PixelPoint& pix_b,
                                    const PanoramaGeometry& pano) noexcept;

}  // namespace mvgeo
