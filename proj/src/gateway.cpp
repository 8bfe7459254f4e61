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


#include "geoanchor/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "endpoint '" + url + "' must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos)) {
    text.replace(pos, secret.size(), "***");
  }
  return text;
}

std::string truncate(const std::string& text, std::size_t limit = 200) {
  return text.size() <= limit ? text : text.substr(0, limit) + "...";
}

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

class LimiterGuard {
 public:
  explicit LimiterGuard(InFlightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
  ~LimiterGuard() { limiter_.release(); }
  LimiterGuard(const LimiterGuard&) = delete;
  LimiterGuard& operator=(const LimiterGuard&) = delete;

 private:
  InFlightLimiter& limiter_;
};

GeoCoordinate anchor_midpoint(const GeoPrompt& prompt, const std::string& context) {
  if (prompt.pos_anchors.empty()) {
    throw Error(ErrorCode::kPrediction, context + ": no positive anchors to fall back on");
  }
  try {
    return geographic_midpoint(prompt.pos_anchors);
  } catch (const Error& e) {
    throw Error(ErrorCode::kPrediction, context + ": " + e.what());
  }
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kRemoteChat: return "remote-chat";
    case ProviderKind::kMockMidpoint: return "mock-midpoint";
    case ProviderKind::kNearestNeighbor: return "nearest-neighbor";
  }
  return "unknown";
}

ProviderKind provider_kind_from_string(std::string_view text) {
  if (text == "remote-chat") return ProviderKind::kRemoteChat;
  if (text == "mock-midpoint") return ProviderKind::kMockMidpoint;
  if (text == "nearest-neighbor") return ProviderKind::kNearestNeighbor;
  throw Error(ErrorCode::kConfig, "unknown provider kind '" + std::string(text) + "'");
}

void ProviderConfig::validate() const {
  const std::string who = "provider '" + name + "'";
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::kConfig, who + ": timeout must be positive");
  if (max_retries < 0) throw Error(ErrorCode::kConfig, who + ": max_retries must be >= 0");
  if (max_in_flight < 1) throw Error(ErrorCode::kConfig, who + ": max_in_flight must be >= 1");
  if (backoff_base_seconds < 0.0 || backoff_factor < 1.0 || backoff_jitter < 0.0 ||
      backoff_jitter >= 1.0) {
    throw Error(ErrorCode::kConfig, who + ": invalid backoff settings");
  }
  if (kind == ProviderKind::kRemoteChat && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, who + ": remote-chat requires an endpoint");
  }
  if (!params.is_object()) throw Error(ErrorCode::kConfig, who + ": params must be an object");
}

ProviderConfig provider_from_json(const std::string& name, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "provider '" + name + "' must be an object");
  ProviderConfig cfg;
  cfg.name = name;
  try {
    cfg.kind = provider_kind_from_string(j.value("kind", std::string("remote-chat")));
    cfg.endpoint = j.value("endpoint", std::string());
    cfg.model = j.value("model", std::string());
    if (j.contains("api_key") || j.contains("credential")) {
      throw Error(ErrorCode::kConfig, "provider '" + name +
                                          "': literal credentials are not accepted; use credential_env");
    }
    cfg.credential_env = j.value("credential_env", std::string());
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
    cfg.backoff_base_seconds = j.value("backoff_base_seconds", cfg.backoff_base_seconds);
    cfg.backoff_factor = j.value("backoff_factor", cfg.backoff_factor);
    cfg.backoff_jitter = j.value("backoff_jitter", cfg.backoff_jitter);
    if (j.contains("params")) cfg.params = j.at("params");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "provider '" + name + "': " + e.what());
  }
  cfg.validate();
  return cfg;
}

json provider_to_json(const ProviderConfig& cfg) {
  return json{{"kind", to_string(cfg.kind)},
              {"endpoint", cfg.endpoint},
              {"model", cfg.model},
              {"credential_env", cfg.credential_env},
              {"timeout_seconds", cfg.timeout_seconds},
              {"max_retries", cfg.max_retries},
              {"max_in_flight", cfg.max_in_flight},
              {"backoff_base_seconds", cfg.backoff_base_seconds},
              {"backoff_factor", cfg.backoff_factor},
              {"backoff_jitter", cfg.backoff_jitter},
              {"params", cfg.params}};
}

std::map<std::string, ProviderConfig> builtin_providers() {
  std::map<std::string, ProviderConfig> providers;
  ProviderConfig midpoint;
  midpoint.name = "mock-midpoint";
  midpoint.kind = ProviderKind::kMockMidpoint;
  providers.emplace(midpoint.name, midpoint);
  ProviderConfig nearest;
  nearest.name = "nearest-neighbor";
  nearest.kind = ProviderKind::kNearestNeighbor;
  providers.emplace(nearest.name, nearest);
  return providers;
}

std::map<std::string, ProviderConfig> provider_configs_from_json(const json& j) {
  auto providers = builtin_providers();
  const json& section = j.contains("providers") ? j.at("providers") : j;
  if (!section.is_object()) throw Error(ErrorCode::kConfig, "providers must be an object");
  for (const auto& [name, body] : section.items()) {
    providers[name] = provider_from_json(name, body);
  }
  return providers;
}

std::map<std::string, ProviderConfig> load_provider_configs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open provider config " + path.string());
  try {
    return provider_configs_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

Gateway::Gateway()
    : Gateway([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }) {}

Gateway::Gateway(Sleeper sleeper) : sleeper_(std::move(sleeper)), rng_(std::random_device{}()) {}

InFlightLimiter& Gateway::limiter_for(const ProviderConfig& cfg) {
  std::lock_guard lock(mutex_);
  auto& slot = limiters_[cfg.name];
  if (!slot) slot = std::make_unique<InFlightLimiter>(cfg.max_in_flight);
  return *slot;
}

std::chrono::duration<double> Gateway::backoff_delay(const ProviderConfig& cfg, int retry) {
  double jitter = 1.0;
  if (cfg.backoff_jitter > 0.0) {
    std::lock_guard lock(mutex_);
    std::uniform_real_distribution<double> dist(1.0 - cfg.backoff_jitter, 1.0 + cfg.backoff_jitter);
    jitter = dist(rng_);
  }
  return std::chrono::duration<double>(cfg.backoff_base_seconds *
                                       std::pow(cfg.backoff_factor, retry - 1) * jitter);
}

json Gateway::build_request(const GeoPrompt& prompt, const ProviderConfig& cfg,
                            const std::vector<ChatTurn>& follow_up) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.text}});
  if (prompt.image) {
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:" + prompt.image->media_type + ";base64," + prompt.image->base64}}}});
  }
  json messages = json::array();
  messages.push_back({{"role", "user"}, {"content", content}});
  for (const auto& turn : follow_up) {
    messages.push_back({{"role", turn.role}, {"content", turn.text}});
  }

  json body{{"model", cfg.model}, {"messages", messages}, {"temperature", 0}};
  for (const auto& [key, value] : cfg.params.items()) body[key] = value;
  return body;
}

std::string Gateway::extract_reply(const std::string& body) {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kTransport, "provider returned a non-JSON body: " + truncate(body));
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw Error(ErrorCode::kTransport, "provider response has no choices: " + truncate(body));
  }
  const json& message = doc["choices"][0].value("message", json::object());
  const json content = message.value("content", json());
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  }
  throw Error(ErrorCode::kTransport, "provider response has no message content: " + truncate(body));
}

std::string Gateway::remote_chat_call(const GeoPrompt& prompt, const ProviderConfig& cfg,
                                      const std::vector<ChatTurn>& follow_up) {
  cfg.validate();
  std::string credential;
  if (!cfg.credential_env.empty()) {
    const char* value = std::getenv(cfg.credential_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw Error(ErrorCode::kConfig, "provider '" + cfg.name + "': environment variable " +
                                          cfg.credential_env + " is not set");
    }
    credential = value;
  }

  const Endpoint endpoint = split_endpoint(cfg.endpoint);
  const std::string body = build_request(prompt, cfg, follow_up).dump();
  httplib::Headers headers;
  if (!credential.empty()) headers.emplace("Authorization", "Bearer " + credential);

  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg.timeout_seconds));
  const int attempts_allowed = 1 + cfg.max_retries;
  std::string last_error;
  int last_status = 0;

  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) sleeper_(backoff_delay(cfg, attempt - 1));

    httplib::Result result{nullptr, httplib::Error::Unknown};
    {
      LimiterGuard guard(limiter_for(cfg));
      httplib::Client client(endpoint.origin);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      result = client.Post(endpoint.path, headers, body, "application/json");
    }

    if (!result) {
      last_status = 0;
      last_error = "request to " + cfg.endpoint + " failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) {
      try {
        return extract_reply(result->body);
      } catch (const Error& e) {
        throw TransportError(redact(e.what(), credential), status, attempt);
      }
    }
    last_status = status;
    last_error = "provider returned HTTP " + std::to_string(status) + ": " +
                 truncate(redact(result->body, credential));
    if (!is_retryable_status(status)) {
      throw TransportError(last_error, status, attempt);
    }
  }
  throw TransportError(last_error + " (after " + std::to_string(attempts_allowed) + " attempts)",
                       last_status, attempts_allowed);
}

GeoPrediction Gateway::geolocate(const GeoPrompt& prompt, const ProviderConfig& cfg) {
  const auto start = Clock::now();
  GeoPrediction prediction;
  prediction.provider = cfg.name;

  switch (cfg.kind) {
    case ProviderKind::kMockMidpoint:
      prediction.location = anchor_midpoint(prompt, "mock-midpoint");
      prediction.raw_response = format_coordinate(prediction.location);
      break;
    case ProviderKind::kNearestNeighbor:
      if (prompt.pos_anchors.empty()) {
        throw Error(ErrorCode::kPrediction, "nearest-neighbor: no positive anchors");
      }
      prediction.location = prompt.pos_anchors.front();
      prediction.raw_response = format_coordinate(prediction.location);
      break;
    case ProviderKind::kRemoteChat: {
      std::vector<ChatTurn> follow_up;
      std::string reply;
      std::string cause;
      const int attempts = 1 + cfg.max_retries;
      for (int attempt = 1; attempt <= attempts; ++attempt) {
        reply = remote_chat_call(prompt, cfg, follow_up);
        try {
          prediction.location = parse_coordinate(reply);
          prediction.raw_response = reply;
          prediction.latency_ms = elapsed_ms(start);
          return prediction;
        } catch (const Error& e) {
          cause = e.what();
        }
        follow_up.push_back({"assistant", reply});
        follow_up.push_back({"user", std::string(kClarificationMessage)});
      }
      prediction.location = anchor_midpoint(
          prompt, "model reply unparseable after " + std::to_string(attempts) + " attempts");
      prediction.fallback_used = true;
      prediction.raw_response = "fallback to positive-anchor midpoint after " +
                                std::to_string(attempts) + " unparseable replies (" + cause +
                                "); last reply: " + reply;
      break;
    }
  }
  prediction.latency_ms = elapsed_ms(start);
  return prediction;
}

}  // namespace geoanchor
