#include "mvgeo/geo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvgeo/error.hpp"

namespace mvgeo {

namespace {

constexpr double kPi = std::numbers::pi;

std::string describe(double lat, double lng)
{
    std::ostringstream os;
    os.precision(12);
    os << "(" << lat << ", " << lng << ")";
    return os.str();
}

}  // namespace

double wrap_degrees(double deg) noexcept
{
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    // fmod of a tiny negative value can round back up to exactly 360
    if (r >= 360.0) r = 0.0;
    return r;
}

double wrap_longitude(double deg) noexcept
{
    double r = wrap_degrees(deg + 180.0) - 180.0;
    if (r >= 180.0) r = -180.0;
    return r;
}

GeoCoordinate make_geo(double lat_deg, double lng_deg)
{
    if (!std::isfinite(lat_deg) || !std::isfinite(lng_deg) || lat_deg < -90.0 || lat_deg > 90.0) {
        throw Error(ErrorCode::InvalidCoordinate, "coordinate out of range " + describe(lat_deg, lng_deg));
    }
    return {lat_deg, wrap_longitude(lng_deg)};
}

CameraPose make_camera(GeoCoordinate location, double yaw_deg, double height_m)
{
    if (!std::isfinite(yaw_deg) || !std::isfinite(height_m) || height_m <= 0.0) {
        throw Error(ErrorCode::InvalidCoordinate, "camera height must be positive and yaw finite");
    }
    return {make_geo(location.lat_deg, location.lng_deg), wrap_degrees(yaw_deg), height_m};
}

EnuVector enu_from_geo(const CameraPose& camera, const GeoCoordinate& target) noexcept
{
    // differences in degrees first: cancellation is exact for nearby points
    const double d_lat = deg_to_rad(target.lat_deg - camera.location.lat_deg);
    const double d_lng = deg_to_rad(target.lng_deg - camera.location.lng_deg);
    return {
        kEarthRadiusM * std::cos(deg_to_rad(camera.location.lat_deg)) * std::sin(d_lng),
        kEarthRadiusM * std::sin(d_lat),
        -camera.height_m,
    };
}

GeoCoordinate geo_from_enu(const GeoCoordinate& origin, double e_x, double e_y)
{
    const double c_lat = deg_to_rad(origin.lat_deg);
    const double sin_dlat = e_y / kEarthRadiusM;
    const double sin_dlng = e_x / (kEarthRadiusM * std::cos(c_lat));
    if (!(std::abs(sin_dlat) <= 1.0) || !(std::abs(sin_dlng) <= 1.0)) {
        throw Error(ErrorCode::InvalidCoordinate, "local offset outside the invertible range");
    }
    const double lat = origin.lat_deg + rad_to_deg(std::asin(sin_dlat));
    const double lng = origin.lng_deg + rad_to_deg(std::asin(sin_dlng));
    if (lat < -90.0 || lat > 90.0) {
        throw Error(ErrorCode::InvalidCoordinate, "local offset crosses a pole");
    }
    return {lat, wrap_longitude(lng)};
}

double ground_distance(const EnuVector& enu) noexcept
{
    return std::hypot(enu.e_x, enu.e_y);
}

double bearing_rad(const EnuVector& enu) noexcept
{
    return std::atan2(enu.e_x, enu.e_y);
}

PixelPoint pixel_from_geo(const CameraPose& camera, const GeoCoordinate& target,
                          const PanoramaGeometry& pano)
{
    const EnuVector enu = enu_from_geo(camera, target);
    const double z = ground_distance(enu);
    if (z == 0.0) {
        throw Error(ErrorCode::DegenerateTarget, "target at camera nadir, bearing undefined");
    }
    const double w = pano.width_px;
    const double h = pano.height_px;
    double x = (kPi + bearing_rad(enu) - deg_to_rad(camera.yaw_deg)) * w / (2.0 * kPi);
    x = std::fmod(x, w);
    if (x < 0.0) x += w;
    if (x >= w) x = 0.0;
    const double y = (kPi / 2.0 - std::atan2(-camera.height_m, z)) * h / kPi;
    return {x, y};
}

double bearing_from_column(const CameraPose& camera, double x, const PanoramaGeometry& pano) noexcept
{
    return 2.0 * kPi * x / pano.width_px - kPi + deg_to_rad(camera.yaw_deg);
}

GeoCoordinate geo_from_pixel(const CameraPose& camera, const PixelPoint& pixel,
                             const PanoramaGeometry& pano)
{
    const double h = pano.height_px;
    if (!(pixel.y > h / 2.0)) {
        throw Error(ErrorCode::AboveHorizon, "pixel row at or above the horizon has no ground intersection");
    }
    if (pixel.y > h) {
        throw Error(ErrorCode::InvalidCoordinate, "pixel row below the image");
    }
    const double elevation = kPi / 2.0 - pixel.y * kPi / h;  // negative below the horizon
    const double z = camera.height_m / std::tan(-elevation);
    const double bearing = bearing_from_column(camera, pixel.x, pano);
    try {
        return geo_from_enu(camera.location, z * std::sin(bearing), z * std::cos(bearing));
    } catch (const Error&) {
        throw Error(ErrorCode::AboveHorizon, "ground intersection too far from the camera");
    }
}

double haversine_distance(const GeoCoordinate& a, const GeoCoordinate& b) noexcept
{
    const double a_lat = deg_to_rad(a.lat_deg);
    const double b_lat = deg_to_rad(b.lat_deg);
    const double s_lat = std::sin(deg_to_rad(b.lat_deg - a.lat_deg) / 2.0);
    const double s_lng = std::sin(deg_to_rad(b.lng_deg - a.lng_deg) / 2.0);
    const double hav = s_lat * s_lat + std::cos(a_lat) * std::cos(b_lat) * s_lng * s_lng;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, hav)));
}

double heading_from_column(double x, const PanoramaGeometry& pano) noexcept
{
    return wrap_degrees(360.0 * x / pano.width_px);
}

PoseFeatures relative_pose_features(const CameraPose& cam_a, const CameraPose& cam_b,
                                    const PixelPoint& pix_a, const PixelPoint& pix_b,
                                    const PanoramaGeometry& pano) noexcept
{
    return {
        haversine_distance(cam_a.location, cam_b.location),
        heading_from_column(pix_a.x, pano),
        heading_from_column(pix_b.x, pano),
    };
}

}  // namespace mvgeo
