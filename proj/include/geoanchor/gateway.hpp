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

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoanchor/geodesy.hpp"
#include "geoanchor/prompt.hpp"

namespace geoanchor {

enum class ProviderKind { kRemoteChat, kMockMidpoint, kNearestNeighbor };

std::string_view to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(std::string_view text);

inline constexpr std::string_view kClarificationMessage =
    "Reply with only two numbers: latitude, longitude.";

struct ProviderConfig {
  std::string name;
  ProviderKind kind = ProviderKind::kMockMidpoint;
  std::string endpoint;        // full URL of the chat-completions route
  std::string model;
  std::string credential_env;  // name of the environment variable holding the key
  double timeout_seconds = 60.0;
  int max_retries = 2;
  int max_in_flight = 4;
  // Transport backoff: base * factor^(retry-1), scaled by 1 +/- jitter.
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;
  /// Extra request fields (temperature, max_tokens, ...) merged into the body.
  nlohmann::json params = nlohmann::json::object();

  /// Throws a config error on timeout <= 0, retries < 0, concurrency < 1 or a
  /// remote provider without an endpoint.
  void validate() const;
};

ProviderConfig provider_from_json(const std::string& name, const nlohmann::json& j);
nlohmann::json provider_to_json(const ProviderConfig& cfg);

/// The two offline providers, always available by name.
std::map<std::string, ProviderConfig> builtin_providers();

/// Reads {"providers": {name: {...}}} and adds the built-in providers.
std::map<std::string, ProviderConfig> load_provider_configs(const std::filesystem::path& path);
std::map<std::string, ProviderConfig> provider_configs_from_json(const nlohmann::json& j);

struct GeoPrediction {
  GeoCoordinate location;
  std::string raw_response;
  std::string provider;
  bool fallback_used = false;
  double latency_ms = 0.0;
};

struct ChatTurn {
  std::string role;  // "assistant" or "user"
  std::string text;
};

/// Counting limiter for in-flight remote requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int capacity) : available_(capacity) {}

  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

/// Submits prompts to providers. Shareable across threads; remote requests
/// are capped per provider at ProviderConfig::max_in_flight.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  Gateway();
  explicit Gateway(Sleeper sleeper);

  GeoPrediction geolocate(const GeoPrompt& prompt, const ProviderConfig& cfg);

  /// One chat-completions exchange with transport retries. `follow_up` turns
  /// are appended after the initial user message.
  std::string remote_chat_call(const GeoPrompt& prompt, const ProviderConfig& cfg,
                               const std::vector<ChatTurn>& follow_up = {});

  /// Request body for a chat-completions call.
  static nlohmann::json build_request(const GeoPrompt& prompt, const ProviderConfig& cfg,
                                      const std::vector<ChatTurn>& follow_up);

  /// Text of the first choice in a chat-completions response body.
  static std::string extract_reply(const std::string& body);

 private:
  std::chrono::duration<double> backoff_delay(const ProviderConfig& cfg, int retry);
  InFlightLimiter& limiter_for(const ProviderConfig& cfg);

  Sleeper sleeper_;
  std::mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, std::unique_ptr<InFlightLimiter>> limiters_;
};

}  // namespace geoanchor
