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


#include "geoanchor/service.hpp"

#include <httplib.h>

#include <cstdio>
#include <fstream>

#include "geoanchor/encoding.hpp"
#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

using json = nlohmann::json;

constexpr int kMaxK = 10000;

HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTransport:
    case ErrorCode::kPrediction: return 502;
    case ErrorCode::kExtractorUnavailable: return 503;
    case ErrorCode::kConfig:
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

json hits_to_json(const std::vector<NeighborHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) {
    out.push_back({{"id", h.id},
                   {"lat", h.location.lat()},
                   {"lon", h.location.lon()},
                   {"score", h.score}});
  }
  return out;
}

int read_k(const json& body, const char* key, int fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  if (!body[key].is_number_integer()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must be an integer");
  }
  const auto k = body[key].get<long long>();
  if (k < 1 || k > kMaxK) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(key) + " must be in [1, " + std::to_string(kMaxK) + "]");
  }
  return static_cast<int>(k);
}

std::string hex64(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path = p;
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ServiceConfig cfg;
  try {
    if (j.contains("listen")) {
      cfg.host = j["listen"].value("host", cfg.host);
      cfg.port = j["listen"].value("port", cfg.port);
    }
    cfg.gallery_path = resolve(base_dir, j.at("gallery_path").get<std::string>());
    if (j.contains("template_path")) {
      cfg.template_path = resolve(base_dir, j["template_path"].get<std::string>());
    }
    cfg.k_pos = j.value("k_pos", cfg.k_pos);
    cfg.k_neg = j.value("k_neg", cfg.k_neg);
    cfg.default_provider = j.value("default_provider", cfg.default_provider);
    cfg.body_limit_bytes = j.value("body_limit_bytes", cfg.body_limit_bytes);
    cfg.cors_origin = j.value("cors_origin", cfg.cors_origin);
    if (j.contains("extractor_url") && !j["extractor_url"].is_null()) {
      cfg.extractor_url = j["extractor_url"].get<std::string>();
    }
    cfg.search_threads = j.value("search_threads", cfg.search_threads);
    if (j.contains("providers")) cfg.providers = provider_configs_from_json(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("service config: ") + e.what());
  }
  if (cfg.k_pos < 1 || cfg.k_neg < 1) throw Error(ErrorCode::kConfig, "k_pos and k_neg must be >= 1");
  if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::kConfig, "port out of range");
  if (!cfg.providers.count(cfg.default_provider)) {
    throw Error(ErrorCode::kConfig, "default provider '" + cfg.default_provider + "' is not configured");
  }
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open service config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return service_config_from_json(j, path.parent_path());
}

GeoService::GeoService(ServiceConfig config)
    : config_(std::move(config)),
      index_(Gallery::open(config_.gallery_path), SearchOptions{config_.search_threads, 16384}),
      template_(config_.template_path ? PromptTemplate::load(*config_.template_path)
                                      : PromptTemplate::default_template()),
      server_(std::make_unique<httplib::Server>()) {
  if (config_.extractor_url) extractor_.emplace(*config_.extractor_url);
  install_routes();
}

GeoService::~GeoService() { stop(); }

HttpReply GeoService::handle_geolocate(const std::string& raw) {
  const json body = json::parse(raw, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return error_reply(400, "malformed_body", "request body must be a JSON object");
  }
  const bool has_embedding = body.contains("embedding") && !body["embedding"].is_null();
  const bool has_image = body.contains("image_b64") && !body["image_b64"].is_null();
  if (has_embedding == has_image) {
    return error_reply(422, "payload_conflict",
                       "provide exactly one of 'embedding' or 'image_b64'");
  }

  try {
    const int k_pos = read_k(body, "k_pos", config_.k_pos);
    const int k_neg = read_k(body, "k_neg", config_.k_neg);
    std::string provider_name = config_.default_provider;
    if (body.contains("provider") && !body["provider"].is_null()) {
      if (!body["provider"].is_string()) {
        return error_reply(400, "invalid_argument", "provider must be a string");
      }
      provider_name = body["provider"].get<std::string>();
    }
    const auto provider = config_.providers.find(provider_name);
    if (provider == config_.providers.end()) {
      return error_reply(400, "unknown_provider", "provider '" + provider_name + "' is not configured");
    }

    std::vector<float> embedding;
    std::optional<ImagePayload> image;
    if (has_embedding) {
      if (!body["embedding"].is_array()) {
        return error_reply(400, "malformed_body", "embedding must be an array of numbers");
      }
      for (const auto& v : body["embedding"]) {
        if (!v.is_number()) return error_reply(400, "malformed_body", "embedding must be numeric");
        embedding.push_back(v.get<float>());
      }
    } else {
      if (!body["image_b64"].is_string()) {
        return error_reply(400, "malformed_body", "image_b64 must be a string");
      }
      if (!extractor_) {
        return error_reply(503, "extractor_unavailable",
                           "no image extractor is configured; submit an 'embedding' instead");
      }
      const std::string bytes = base64_decode(body["image_b64"].get<std::string>());
      embedding = extractor_->embed(bytes);
      image = ImagePayload{sniff_image_media_type(bytes), base64_encode(bytes)};
    }
    if (embedding.size() != index_.gallery().dim()) {
      return error_reply(400, "dimension_mismatch",
                         "embedding has dimension " + std::to_string(embedding.size()) +
                             ", gallery expects " + std::to_string(index_.gallery().dim()));
    }

    const auto neighbors = index_.search(embedding, k_pos, k_neg);
    const auto prompt = build_prompt(neighbors, template_, std::move(image));
    const auto prediction = gateway_.geolocate(prompt, provider->second);

    json reply{{"prediction", {{"lat", prediction.location.lat()}, {"lon", prediction.location.lon()}}},
               {"fallback_used", prediction.fallback_used},
               {"provider", prediction.provider},
               {"positives", hits_to_json(neighbors.positives)},
               {"negatives", hits_to_json(neighbors.negatives)},
               {"prompt_text", prompt.text},
               {"raw_response", prediction.raw_response},
               {"latency_ms", prediction.latency_ms}};
    return {200, std::move(reply)};
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), to_string(e.code()), e.what());
  }
}

HttpReply GeoService::handle_stats() const {
  const Gallery& g = index_.gallery();
  return {200, json{{"count", g.size()},
                    {"dim", g.dim()},
                    {"checksum", hex64(g.checksum())},
                    {"gallery_path", g.path().string()}}};
}

HttpReply GeoService::handle_providers() const {
  json names = json::array();
  for (const auto& [name, cfg] : config_.providers) {
    names.push_back({{"name", name}, {"kind", to_string(cfg.kind)}});
  }
  return {200, json{{"providers", names},
                    {"default", config_.default_provider},
                    {"k_pos", config_.k_pos},
                    {"k_neg", config_.k_neg},
                    {"image_upload", extractor_.has_value()}}};
}

void GeoService::install_routes() {
  auto& srv = *server_;
  srv.set_payload_max_length(config_.body_limit_bytes);
  srv.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };

  srv.Post("/v1/geolocate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_geolocate(req.body));
  });
  srv.Get("/v1/index/stats", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_stats());
  });
  srv.Get("/v1/providers", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_providers());
  });
  srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const int status = res.status;
    std::string code = status == 404 ? "not_found" : status == 413 ? "payload_too_large" : "http_error";
    send(res, error_reply(status, code, "HTTP " + std::to_string(status)));
  });
  srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send(res, error_reply(500, "internal_error", "internal server error"));
  });
}

int GeoService::bind() {
  if (config_.port == 0) return server_->bind_to_any_port(config_.host);
  if (!server_->bind_to_port(config_.host, config_.port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void GeoService::listen() { server_->listen_after_bind(); }

void GeoService::stop() {
  if (server_) server_->stop();
}

}  // namespace geoanchor
