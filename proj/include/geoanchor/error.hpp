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

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoanchor {

/// Machine-readable error categories. The string form is what the service
/// returns in error bodies and what the CLI maps onto exit codes.
enum class ErrorCode {
  kInvalidArgument,
  kRange,
  kParse,
  kFormat,
  kCorruption,
  kIo,
  kTemplate,
  kConfig,
  kTransport,
  kPrediction,
  kExtractorUnavailable,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by remote calls; carries the HTTP status when one was received
/// (0 for connection failures and timeouts).
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status, int attempts)
      : Error(ErrorCode::kTransport, message), status_(status), attempts_(attempts) {}

  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

}  // namespace geoanchor
