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


#include "geoanchor/extractor_client.hpp"

#include <httplib.h>

#include <chrono>
#include <json.hpp>

#include "geoanchor/error.hpp"

namespace geoanchor {

ExtractorClient::ExtractorClient(std::string url, double timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {
  if (url_.find("://") == std::string::npos) {
    throw Error(ErrorCode::kConfig, "extractor url '" + url_ + "' must start with http://");
  }
}

std::vector<float> ExtractorClient::embed(std::string_view image_bytes) const {
  const auto scheme_end = url_.find("://");
  const auto path_start = url_.find('/', scheme_end + 3);
  const std::string origin = url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/v1/embed" : url_.substr(path_start);

  httplib::Client client(origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(timeout_seconds_));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  auto result = client.Post(path, image_bytes.data(), image_bytes.size(), "application/octet-stream");
  if (!result) {
    throw Error(ErrorCode::kExtractorUnavailable,
                "extractor at " + url_ + " unreachable: " + httplib::to_string(result.error()));
  }
  if (result->status == 400) {
    throw Error(ErrorCode::kInvalidArgument, "extractor rejected the image: " + result->body.substr(0, 200));
  }
  if (result->status < 200 || result->status >= 300) {
    throw Error(ErrorCode::kExtractorUnavailable,
                "extractor returned HTTP " + std::to_string(result->status));
  }
  const auto doc = nlohmann::json::parse(result->body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("embedding") || !doc["embedding"].is_array()) {
    throw Error(ErrorCode::kExtractorUnavailable, "extractor returned a malformed body");
  }
  try {
    return doc["embedding"].get<std::vector<float>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kExtractorUnavailable, "extractor embedding is not numeric");
  }
}

}  // namespace geoanchor
