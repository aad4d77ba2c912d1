#include "mvgeo/types.hpp"

#include <cmath>

#include "mvgeo/error.hpp"

namespace mvgeo {

PixelPoint BoundingBox::footpoint(std::optional<double> wrap_width) const noexcept
{
    double x = 0.5 * (x_min + x_max);
    if (wrap_width && *wrap_width > 0.0) {
        x = std::fmod(x, *wrap_width);
        if (x < 0.0) x += *wrap_width;
    }
    return {x, y_max};
}

bool box_within_image(const BoundingBox& box, const PanoramaGeometry& pano) noexcept
{
    const double w = pano.width_px;
    const double h = pano.height_px;
    if (!box.well_ordered()) return false;
    if (box.y_min < 0.0 || box.y_max > h) return false;
    if (box.x_min < 0.0 || box.x_min > w) return false;
    return box.x_max <= w || (box.x_min < w && box.width() <= w);
}

std::size_t SceneDataset::box_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& [id, record] : images) n += record.ground_truth.size();
    return n;
}

const ImageRecord& SceneDataset::image(const std::string& image_id) const
{
    const auto it = images.find(image_id);
    if (it == images.end()) {
        throw Error(ErrorCode::IntegrityError, "unknown image '" + image_id + "'");
    }
    return it->second;
}

}  // namespace mvgeo
