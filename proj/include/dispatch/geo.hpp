#pragma once

#include <cmath>

#include "dispatch/errors.hpp"

namespace dispatch {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kMetersPerMile = 1609.344;
constexpr double kPi = 3.141592653589793238462643383279502884;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

inline double mph_to_mps(double mph) { return mph * kMetersPerMile / 3600.0; }
inline double mps_to_mph(double mps) { return mps * 3600.0 / kMetersPerMile; }

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline bool operator==(const LatLon& a, const LatLon& b) {
  return a.lat == b.lat && a.lon == b.lon;
}

// Straight-line distance in meters under the equirectangular approximation,
// referenced at the mean latitude of the two points.  Good enough at city
// scale and cheap; this is the metric the baseline dispatch rule uses.
inline double euclidean_m(const LatLon& a, const LatLon& b) {
  const double phi_m = deg2rad(0.5 * (a.lat + b.lat));
  const double dx = kEarthRadiusM * std::cos(phi_m) * deg2rad(b.lon - a.lon);
  const double dy = kEarthRadiusM * deg2rad(b.lat - a.lat);
  return std::sqrt(dx * dx + dy * dy);
}

// Position a fraction f of the way from a to b along the straight segment.
inline LatLon interpolate(const LatLon& a, const LatLon& b, double f) {
  if (f <= 0.0) return a;
  if (f >= 1.0) return b;
  return LatLon{a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon)};
}

struct BoundingBox {
  double min_lat = 0.0, min_lon = 0.0;
  double max_lat = 0.0, max_lon = 0.0;

  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon &&
           p.lon <= max_lon;
  }
};

// Local flat projection anchored at the bounding box's south-west corner.
// x grows east, y grows north, both in meters.  The longitude scale is fixed
// at the mid-latitude so the projection is affine (and exactly invertible).
class LocalProjection {
 public:
  LocalProjection() = default;
  explicit LocalProjection(const BoundingBox& box)
      : lat0_(box.min_lat),
        lon0_(box.min_lon),
        lon_scale_(kEarthRadiusM *
                   std::cos(deg2rad(0.5 * (box.min_lat + box.max_lat)))) {}

  double x(const LatLon& p) const { return lon_scale_ * deg2rad(p.lon - lon0_); }
  double y(const LatLon& p) const { return kEarthRadiusM * deg2rad(p.lat - lat0_); }

  LatLon from_xy(double x, double y) const {
    return LatLon{lat0_ + rad2deg(y / kEarthRadiusM),
                  lon0_ + rad2deg(x / lon_scale_)};
  }

 private:
  double lat0_ = 0.0, lon0_ = 0.0;
  double lon_scale_ = kEarthRadiusM;
};

// Convenience for building test/synthetic regions with metric extents.
inline BoundingBox bbox_from_extent(double min_lat, double min_lon,
                                    double width_m, double height_m) {
  BoundingBox box;
  box.min_lat = min_lat;
  box.min_lon = min_lon;
  box.max_lat = min_lat + rad2deg(height_m / kEarthRadiusM);
  // Scale longitudes at the mid latitude, matching LocalProjection.
  const double mid = 0.5 * (box.min_lat + box.max_lat);
  box.max_lon =
      min_lon + rad2deg(width_m / (kEarthRadiusM * std::cos(deg2rad(mid))));
  return box;
}

}  // namespace dispatch
