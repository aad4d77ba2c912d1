#pragma once

namespace mvgeo {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mvgeo
