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


#include "geoanchor/prompt.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "geoanchor/encoding.hpp"
#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

constexpr std::string_view kDefaultTemplate =
    "You are an expert in image geolocalization. Estimate the exact geographic coordinates "
    "where this photo was taken.\n"
    "\n"
    "Coordinates of places with images similar to this photo:\n"
    "{POSITIVE_ANCHORS}\n"
    "\n"
    "Coordinates of places with images dissimilar to this photo; the photo is "
    "unlikely to be near these:\n"
    "{NEGATIVE_ANCHORS}\n"
    "\n"
    "{ANSWER_FORMAT}\n";

std::string format_degrees(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

const std::regex& pair_pattern() {
  // lat [hemisphere] separator [lon label] lon [hemisphere]
  static const std::regex re(
      R"((?:\b(?:latitude|lat)\b\s*[:=]?\s*)?\(?\s*([-+]?\d+(?:\.\d+)?)(?:\s*([ns])\b)?)"
      R"((?:\s*,\s*|\s+)(?:(?:longitude|lng|lon)\b\s*[:=]?\s*)?([-+]?\d+(?:\.\d+)?)(?:\s*([ew])\b)?)",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  return re;
}

double to_double(const std::string& text) {
  std::string_view s = text;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), value);
  return value;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string render_anchor_list(const std::vector<GeoCoordinate>& anchors) {
  if (anchors.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1) + ". " + format_coordinate(anchors[i]);
  }
  return out;
}

void replace_once(std::string& text, std::string_view placeholder, const std::string& value) {
  const auto pos = text.find(placeholder);
  text.replace(pos, placeholder.size(), value);
}

}  // namespace

std::string format_coordinate(const GeoCoordinate& c) {
  return format_degrees(c.lat()) + ", " + format_degrees(c.lon());
}

std::string normalize_numeric_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::string_view rest = text.substr(i);
    if (rest.substr(0, 3) == "\xE2\x88\x92" || rest.substr(0, 3) == "\xE2\x80\x93") {
      out += '-';  // U+2212 minus sign, U+2013 en dash
      i += 2;
    } else if (rest.substr(0, 2) == "\xC2\xB0") {
      i += 1;  // U+00B0 degree sign
    } else if (rest.substr(0, 3) == "\xE2\x80\xB2" || rest.substr(0, 3) == "\xE2\x80\xB3") {
      i += 2;  // prime / double prime
    } else {
      out += text[i];
    }
  }
  return out;
}

std::optional<CoordinateMatch> find_coordinate(std::string_view normalized, std::size_t from) {
  if (from >= normalized.size()) return std::nullopt;
  std::cmatch m;
  const char* begin = normalized.data() + from;
  const char* end = normalized.data() + normalized.size();
  if (!std::regex_search(begin, end, m, pair_pattern())) return std::nullopt;

  double lat = to_double(m[1].str());
  double lon = to_double(m[3].str());
  if (m[2].matched && (m[2].str() == "s" || m[2].str() == "S")) lat = -std::abs(lat);
  if (m[4].matched && (m[4].str() == "w" || m[4].str() == "W")) lon = -std::abs(lon);
  if (!(lat >= -90.0 && lat <= 90.0)) {
    throw Error(ErrorCode::kRange,
                "latitude " + m[1].str() + " outside [-90, 90] in '" + m[0].str() + "'");
  }
  CoordinateMatch match;
  match.coordinate = GeoCoordinate(lat, lon);
  match.begin = from + static_cast<std::size_t>(m.position(0));
  match.end = match.begin + static_cast<std::size_t>(m.length(0));
  return match;
}

GeoCoordinate parse_coordinate(std::string_view text) {
  const std::string normalized = normalize_numeric_text(text);
  const auto match = find_coordinate(normalized);
  if (!match) {
    constexpr std::size_t kMaxQuoted = 200;
    std::string quoted(text.substr(0, kMaxQuoted));
    if (text.size() > kMaxQuoted) quoted += "...";
    throw Error(ErrorCode::kParse, "no coordinate pair found in '" + quoted + "'");
  }
  return match->coordinate;
}

std::vector<GeoCoordinate> scan_coordinates(std::string_view text) {
  const std::string normalized = normalize_numeric_text(text);
  std::vector<GeoCoordinate> found;
  std::size_t pos = 0;
  while (auto match = find_coordinate(normalized, pos)) {
    found.push_back(match->coordinate);
    pos = match->end;
  }
  return found;
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  for (const auto placeholder : {kPositivePlaceholder, kNegativePlaceholder, kAnswerPlaceholder}) {
    const auto n = count_occurrences(text_, placeholder);
    if (n != 1) {
      throw Error(ErrorCode::kTemplate, "template must contain " + std::string(placeholder) +
                                            " exactly once (found " + std::to_string(n) + ")");
    }
  }
}

PromptTemplate PromptTemplate::default_template() { return PromptTemplate(std::string(kDefaultTemplate)); }

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(buf.str());
}

std::string PromptTemplate::hash() const { return sha256_hex(text_); }

GeoPrompt build_prompt(const NeighborSet& neighbors, const PromptTemplate& tmpl,
                       std::optional<ImagePayload> image) {
  GeoPrompt prompt;
  prompt.image = std::move(image);
  for (const auto& hit : neighbors.positives) prompt.pos_anchors.push_back(hit.location);
  for (const auto& hit : neighbors.negatives) prompt.neg_anchors.push_back(hit.location);

  // Placeholders are substituted in a fixed order; anchor text cannot contain
  // a placeholder, so later substitutions never touch earlier output.
  std::string text = tmpl.text();
  replace_once(text, kAnswerPlaceholder, std::string(kAnswerFormat));
  replace_once(text, kNegativePlaceholder, render_anchor_list(prompt.neg_anchors));
  replace_once(text, kPositivePlaceholder, render_anchor_list(prompt.pos_anchors));
  prompt.text = std::move(text);
  return prompt;
}

}  // namespace geoanchor
