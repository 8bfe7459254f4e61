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


#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace geoanchor {

/// IUGG mean Earth radius.
inline constexpr double kEarthRadiusKm = 6371.0088;

/// Latitude/longitude in decimal degrees. Latitude is validated to
/// [-90, 90]; longitude is wrapped into (-180, 180].
class GeoCoordinate {
 public:
  GeoCoordinate() = default;
  GeoCoordinate(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Wraps any finite longitude into (-180, 180].
double normalize_longitude(double lon);

/// Haversine great-circle distance on the mean-radius sphere.
double distance_km(const GeoCoordinate& a, const GeoCoordinate& b) noexcept;

/// Renormalized mean of the coordinates' unit vectors. Throws on an empty
/// list and when the mean vector vanishes (e.g. antipodal pairs).
GeoCoordinate geographic_midpoint(std::span<const GeoCoordinate> coords);

/// Moves `distance` km from `start` along the given initial bearing.
GeoCoordinate destination_point(const GeoCoordinate& start, double bearing_deg,
                                double distance);

class RadiusThresholds {
 public:
  /// 1, 25, 200, 750 and 2500 km (street, city, region, country, continent).
  RadiusThresholds();
  explicit RadiusThresholds(std::vector<double> radii_km);

  const std::vector<double>& radii() const noexcept { return radii_; }
  std::size_t size() const noexcept { return radii_.size(); }
  bool is_default() const;

 private:
  std::vector<double> radii_;
};

struct AccuracyTable {
  std::vector<double> radii_km;
  /// Fraction of queries within each radius, in [0, 1].
  std::vector<double> fractions;
  std::size_t query_count = 0;

  friend bool operator==(const AccuracyTable&, const AccuracyTable&) = default;
};

using PredictionPair = std::pair<GeoCoordinate, GeoCoordinate>;  // (predicted, truth)

/// Share of pairs whose distance is <= r, for each threshold r.
AccuracyTable accuracy_at(const RadiusThresholds& thresholds,
                          std::span<const PredictionPair> pairs);

/// Same aggregation over precomputed distances. Failed queries are passed as
/// +infinity and so count as misses at every radius.
AccuracyTable accuracy_from_distances(const RadiusThresholds& thresholds,
                                      std::span<const double> distances_km);

}  // namespace geoanchor
