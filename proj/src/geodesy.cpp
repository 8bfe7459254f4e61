/*
 * Copyright 2026 The geoanchor Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "geoanchor/geodesy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::array<double, 3> to_unit_vector(const GeoCoordinate& c) {
  const double lat = c.lat() * kDegToRad;
  const double lon = c.lon() * kDegToRad;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

}  // namespace

double normalize_longitude(double lon) {
  if (!std::isfinite(lon)) {
    throw Error(ErrorCode::kRange, "longitude is not finite");
  }
  if (lon > -180.0 && lon <= 180.0) return lon;
  double wrapped = std::fmod(lon, 360.0);
  if (wrapped > 180.0) wrapped -= 360.0;
  if (wrapped <= -180.0) wrapped += 360.0;
  return wrapped;
}

GeoCoordinate::GeoCoordinate(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0)) {
    throw Error(ErrorCode::kRange, "latitude " + std::to_string(lat) + " outside [-90, 90]");
  }
  lat_ = lat;
  lon_ = normalize_longitude(lon);
}

double distance_km(const GeoCoordinate& a, const GeoCoordinate& b) noexcept {
  // Canonical argument order makes the result bit-for-bit symmetric.
  const bool swap = std::pair(a.lat(), a.lon()) > std::pair(b.lat(), b.lon());
  const GeoCoordinate& p = swap ? b : a;
  const GeoCoordinate& q = swap ? a : b;

  const double lat1 = p.lat() * kDegToRad;
  const double lat2 = q.lat() * kDegToRad;
  const double sin_dlat = std::sin((lat2 - lat1) / 2.0);
  const double sin_dlon = std::sin((q.lon() - p.lon()) * kDegToRad / 2.0);
  double h = sin_dlat * sin_dlat + std::cos(lat1) * std::cos(lat2) * sin_dlon * sin_dlon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

GeoCoordinate geographic_midpoint(std::span<const GeoCoordinate> coords) {
  if (coords.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "geographic midpoint of an empty list");
  }
  if (coords.size() == 1) return coords.front();

  // Summation order is fixed by sorting so permutations of the input agree.
  std::vector<GeoCoordinate> sorted(coords.begin(), coords.end());
  std::sort(sorted.begin(), sorted.end(), [](const GeoCoordinate& l, const GeoCoordinate& r) {
    return std::pair(l.lat(), l.lon()) < std::pair(r.lat(), r.lon());
  });

  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (const auto& c : sorted) {
    const auto v = to_unit_vector(c);
    for (std::size_t i = 0; i < 3; ++i) sum[i] += v[i];
  }
  const double n = static_cast<double>(sorted.size());
  const double x = sum[0] / n;
  const double y = sum[1] / n;
  const double z = sum[2] / n;
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (norm < 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "geographic midpoint is undefined: coordinates cancel out (antipodal configuration)");
  }
  const double lat = std::asin(std::clamp(z / norm, -1.0, 1.0)) * kRadToDeg;
  const double lon = std::hypot(x, y) == 0.0 ? 0.0 : std::atan2(y, x) * kRadToDeg;
  return {lat, lon};
}

GeoCoordinate destination_point(const GeoCoordinate& start, double bearing_deg, double distance) {
  const double delta = distance / kEarthRadiusKm;
  const double theta = bearing_deg * kDegToRad;
  const double lat1 = start.lat() * kDegToRad;
  const double lon1 = start.lon() * kDegToRad;
  const double sin_lat2 =
      std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(theta);
  const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
  const double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * sin_lat2);
  return {std::clamp(lat2 * kRadToDeg, -90.0, 90.0), lon2 * kRadToDeg};
}

RadiusThresholds::RadiusThresholds() : radii_{1.0, 25.0, 200.0, 750.0, 2500.0} {}

RadiusThresholds::RadiusThresholds(std::vector<double> radii_km) : radii_(std::move(radii_km)) {
  if (radii_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one radius threshold is required");
  }
  for (std::size_t i = 0; i < radii_.size(); ++i) {
    if (!std::isfinite(radii_[i]) || radii_[i] <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "radius thresholds must be positive");
    }
    if (i > 0 && radii_[i] <= radii_[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "radius thresholds must be strictly increasing");
    }
  }
}

bool RadiusThresholds::is_default() const { return radii_ == RadiusThresholds().radii_; }

AccuracyTable accuracy_from_distances(const RadiusThresholds& thresholds,
                                      std::span<const double> distances_km) {
  if (distances_km.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "accuracy over zero queries is undefined");
  }
  AccuracyTable table;
  table.radii_km = thresholds.radii();
  table.query_count = distances_km.size();
  const double n = static_cast<double>(distances_km.size());
  for (double r : thresholds.radii()) {
    const auto hits = std::count_if(distances_km.begin(), distances_km.end(),
                                    [r](double d) { return d <= r; });
    table.fractions.push_back(static_cast<double>(hits) / n);
  }
  return table;
}

AccuracyTable accuracy_at(const RadiusThresholds& thresholds,
                          std::span<const PredictionPair> pairs) {
  std::vector<double> distances;
  distances.reserve(pairs.size());
  for (const auto& [predicted, truth] : pairs) distances.push_back(distance_km(predicted, truth));
  return accuracy_from_distances(thresholds, distances);
}

}  // namespace geoanchor
