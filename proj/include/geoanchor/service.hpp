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
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "geoanchor/extractor_client.hpp"
#include "geoanchor/flat_index.hpp"
#include "geoanchor/gateway.hpp"
#include "geoanchor/prompt.hpp"

namespace httplib {
class Server;
}

namespace geoanchor {

inline constexpr std::size_t kDefaultBodyLimit = 20u * 1024u * 1024u;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path gallery_path;
  std::optional<std::filesystem::path> template_path;
  int k_pos = kDefaultPositiveK;
  int k_neg = kDefaultNegativeK;
  std::map<std::string, ProviderConfig> providers = builtin_providers();
  std::string default_provider = "mock-midpoint";
  std::size_t body_limit_bytes = kDefaultBodyLimit;
  std::string cors_origin = "*";
  std::optional<std::string> extractor_url;
  unsigned search_threads = 0;
};

/// Relative paths in the document resolve against `base_dir`.
ServiceConfig service_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// HTTP front end for the retrieval + prompting pipeline:
///   POST /v1/geolocate, GET /v1/index/stats, GET /v1/providers.
/// The gallery is opened once at construction and shared read-only.
class GeoService {
 public:
  explicit GeoService(ServiceConfig config);
  ~GeoService();

  GeoService(const GeoService&) = delete;
  GeoService& operator=(const GeoService&) = delete;

  HttpReply handle_geolocate(const std::string& body);
  HttpReply handle_stats() const;
  HttpReply handle_providers() const;

  /// Binds the configured address (port 0 picks a free port) and returns the
  /// bound port. Call before listen().
  int bind();
  /// Serves until stop() is called.
  void listen();
  void stop();

  const ServiceConfig& config() const noexcept { return config_; }
  const FlatIndex& index() const noexcept { return index_; }

 private:
  void install_routes();

  ServiceConfig config_;
  FlatIndex index_;
  PromptTemplate template_;
  Gateway gateway_;
  std::optional<ExtractorClient> extractor_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace geoanchor
