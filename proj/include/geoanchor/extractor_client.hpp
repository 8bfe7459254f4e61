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

#include <string>
#include <string_view>
#include <vector>

namespace geoanchor {

/// Client for the image-embedding sidecar (POST /v1/embed with raw image
/// bytes, JSON {embedding, dim} back).
class ExtractorClient {
 public:
  explicit ExtractorClient(std::string url, double timeout_seconds = 60.0);

  const std::string& url() const noexcept { return url_; }

  /// Throws kExtractorUnavailable when the sidecar cannot be reached or fails,
  /// kInvalidArgument when it rejects the image.
  std::vector<float> embed(std::string_view image_bytes) const;

 private:
  std::string url_;
  double timeout_seconds_;
};

}  // namespace geoanchor
