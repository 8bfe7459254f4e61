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


#include "geoanchor/error.hpp"

namespace geoanchor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kRange: return "out_of_range";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kCorruption: return "corruption";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kTemplate: return "template_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kTransport: return "transport_error";
    case ErrorCode::kPrediction: return "prediction_error";
    case ErrorCode::kExtractorUnavailable: return "extractor_unavailable";
  }
  return "unknown";
}

}  // namespace geoanchor
