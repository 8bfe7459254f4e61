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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoanchor/flat_index.hpp"
#include "geoanchor/geodesy.hpp"

namespace geoanchor {

/// "{lat}, {lon}" with six fractional digits; negative zero prints as zero.
std::string format_coordinate(const GeoCoordinate& c);

/// Replaces the Unicode minus sign and en dash with '-' and drops degree signs.
std::string normalize_numeric_text(std::string_view text);

struct CoordinateMatch {
  GeoCoordinate coordinate;
  std::size_t begin = 0;  // byte offsets into the normalized text
  std::size_t end = 0;
};

/// Finds the first "lat, lon" number pair at or after `from` in already
/// normalized text. Labels (lat/latitude, lon/lng/longitude) and an opening
/// parenthesis are accepted. Returns nullopt when no pair is present; throws a
/// range error when the latitude of the first pair is out of range.
std::optional<CoordinateMatch> find_coordinate(std::string_view normalized, std::size_t from = 0);

/// Extracts the first coordinate pair from free-form model output.
GeoCoordinate parse_coordinate(std::string_view text);

/// Every coordinate pair in the text, scanning left to right.
std::vector<GeoCoordinate> scan_coordinates(std::string_view text);

inline constexpr std::string_view kPositivePlaceholder = "{POSITIVE_ANCHORS}";
inline constexpr std::string_view kNegativePlaceholder = "{NEGATIVE_ANCHORS}";
inline constexpr std::string_view kAnswerPlaceholder = "{ANSWER_FORMAT}";
inline constexpr std::string_view kAnswerFormat =
    "Answer with exactly one line: <latitude>, <longitude> in decimal degrees.";

class PromptTemplate {
 public:
  /// Throws a template error unless each placeholder occurs exactly once.
  explicit PromptTemplate(std::string text);

  static PromptTemplate default_template();
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& text() const noexcept { return text_; }
  /// Hex SHA-256 of the template text.
  std::string hash() const;

 private:
  std::string text_;
};

/// Query image carried alongside the prompt for multimodal providers.
struct ImagePayload {
  std::string media_type;
  std::string base64;
};

struct GeoPrompt {
  std::string text;
  std::optional<ImagePayload> image;
  std::vector<GeoCoordinate> pos_anchors;  // most similar first
  std::vector<GeoCoordinate> neg_anchors;  // most dissimilar first
};

/// Renders the template with ranked anchor lines ("1. lat, lon"); an empty
/// list renders as "none". Ids and scores never appear in the text.
GeoPrompt build_prompt(const NeighborSet& neighbors, const PromptTemplate& tmpl,
                       std::optional<ImagePayload> image = std::nullopt);

}  // namespace geoanchor
