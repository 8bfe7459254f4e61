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

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "geoanchor/encoding.hpp"
#include "geoanchor/error.hpp"
#include "support/stub_server.hpp"
#include "support/test_support.hpp"

namespace geoanchor {
namespace {

using json = nlohmann::json;
using testing::StubServer;
using testing::TempDir;

// Four records: ids 1 and 2 share a direction and sit on the equator at
// lon 10 and 20, so a two-anchor midpoint lands on (0, 15).
std::vector<EmbeddingRecord> fixture_records() {
  return {{1, {1, 0, 0, 0}, {0, 10}, {}},
          {2, {0.9f, 0.4358899f, 0, 0}, {0, 20}, {}},
          {3, {0, 0, 1, 0}, {50, 50}, {}},
          {4, {-0.6f, 0, 0, 0.8f}, {-30, -60}, {}}};
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    gallery_ = dir_ / "g.bin";
    build_gallery(fixture_records(), 4, gallery_);
    config_.gallery_path = gallery_;
    config_.port = 0;
    ProviderConfig dead;
    dead.name = "dead";
    dead.kind = ProviderKind::kRemoteChat;
    dead.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    dead.max_retries = 0;
    dead.timeout_seconds = 1;
    config_.providers.emplace(dead.name, dead);
  }

  TempDir dir_;
  std::filesystem::path gallery_;
  ServiceConfig config_;
};

TEST_F(ServiceTest, MidpointAndSelfRetrieval) {
  GeoService svc(config_);
  auto reply = svc.handle_geolocate(R"({"embedding":[1,0,0,0],"k_pos":2,"k_neg":1})");
  ASSERT_EQ(reply.status, 200) << reply.body.dump();
  EXPECT_NEAR(reply.body["prediction"]["lat"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(reply.body["prediction"]["lon"].get<double>(), 15.0, 1e-9);
  EXPECT_EQ(reply.body["fallback_used"], false);
  ASSERT_EQ(reply.body["positives"].size(), 2u);
  EXPECT_EQ(reply.body["positives"][0]["id"], 1);
  EXPECT_EQ(reply.body["negatives"][0]["id"], 4);
  EXPECT_EQ(reply.body["negatives"][0]["lat"], -30.0);
  EXPECT_TRUE(reply.body["prompt_text"].is_string());
  EXPECT_TRUE(reply.body.contains("raw_response"));
  EXPECT_TRUE(reply.body.contains("latency_ms"));

  reply = svc.handle_geolocate(R"({"embedding":[0,0,1,0],"k_pos":1,"provider":"nearest-neighbor"})");
  ASSERT_EQ(reply.status, 200);
  EXPECT_EQ(reply.body["prediction"]["lat"], 50.0);
  EXPECT_EQ(reply.body["prediction"]["lon"], 50.0);
}

TEST_F(ServiceTest, ErrorStatuses) {
  GeoService svc(config_);
  auto code = [](const HttpReply& r) { return r.body["error"]["code"].get<std::string>(); };

  EXPECT_EQ(svc.handle_geolocate("{not json").status, 400);
  EXPECT_EQ(svc.handle_geolocate("[1,2]").status, 400);
  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":[1,0,0]})").status, 400);
  EXPECT_EQ(code(svc.handle_geolocate(R"({"embedding":[1,0,0]})")), "dimension_mismatch");
  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":["a",0,0,0]})").status, 400);
  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":[1,0,0,0],"k_pos":0})").status, 400);
  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":[1,0,0,0],"provider":"nope"})").status, 400);
  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":[0,0,0,0]})").status, 400);

  EXPECT_EQ(svc.handle_geolocate(R"({"embedding":[1,0,0,0],"image_b64":"AAAA"})").status, 422);
  EXPECT_EQ(svc.handle_geolocate(R"({"k_pos":3})").status, 422);

  const auto no_extractor = svc.handle_geolocate(R"({"image_b64":"/9j/4AAQ"})");
  EXPECT_EQ(no_extractor.status, 503);
  EXPECT_NE(no_extractor.body["error"]["message"].get<std::string>().find("embedding"), std::string::npos);

  const auto dead = svc.handle_geolocate(R"({"embedding":[1,0,0,0],"provider":"dead"})");
  EXPECT_EQ(dead.status, 502);
  EXPECT_EQ(code(dead), "transport_error");
}

TEST_F(ServiceTest, StatsAreStableAcrossCallsAndRestarts) {
  json first;
  {
    GeoService svc(config_);
    first = svc.handle_stats().body;
    EXPECT_EQ(svc.handle_stats().body, first);
  }
  GeoService again(config_);
  EXPECT_EQ(again.handle_stats().body, first);
  EXPECT_EQ(first["count"], 4);
  EXPECT_EQ(first["dim"], 4);
  EXPECT_EQ(first["checksum"].get<std::string>().size(), 16u);
  EXPECT_EQ(first["gallery_path"], gallery_.string());

  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(Gallery::open(gallery_).checksum()));
  EXPECT_EQ(first["checksum"], hex);
}

TEST_F(ServiceTest, ImageUploadGoesThroughExtractor) {
  StubServer extractor;
  std::string received;
  extractor.server.Post("/v1/embed", [&](const httplib::Request& req, httplib::Response& res) {
    received = req.body;
    res.set_content(json{{"embedding", {1, 0, 0, 0}}, {"dim", 4}}.dump(), "application/json");
  });
  extractor.start();
  config_.extractor_url = extractor.url("/v1/embed");
  GeoService svc(config_);

  const std::string jpeg("\xFF\xD8\xFF\xE0 fake jpeg", 14);
  const auto reply = svc.handle_geolocate(json{{"image_b64", base64_encode(jpeg)}, {"k_pos", 2}}.dump());
  ASSERT_EQ(reply.status, 200) << reply.body.dump();
  EXPECT_EQ(received, jpeg);
  EXPECT_NEAR(reply.body["prediction"]["lon"].get<double>(), 15.0, 1e-9);

  extractor.stop();
  EXPECT_EQ(svc.handle_geolocate(json{{"image_b64", base64_encode(jpeg)}}.dump()).status, 503);
}

TEST_F(ServiceTest, LiveServerRoutesCorsAndLimits) {
  config_.body_limit_bytes = 4096;
  config_.cors_origin = "http://console.local";
  GeoService svc(config_);
  const int port = svc.bind();
  ASSERT_GT(port, 0);
  std::thread serving([&] { svc.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto stats = client.Get("/v1/index/stats");
  ASSERT_TRUE(stats);
  EXPECT_EQ(stats->status, 200);
  EXPECT_EQ(stats->get_header_value("Access-Control-Allow-Origin"), "http://console.local");
  EXPECT_EQ(json::parse(stats->body)["count"], 4);

  auto providers = client.Get("/v1/providers");
  ASSERT_TRUE(providers);
  EXPECT_EQ(json::parse(providers->body)["default"], "mock-midpoint");

  auto preflight = client.Options("/v1/geolocate");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);
  EXPECT_FALSE(preflight->get_header_value("Access-Control-Allow-Methods").empty());

  auto ok = client.Post("/v1/geolocate", R"({"embedding":[1,0,0,0],"k_pos":2})", "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);

  auto conflict = client.Post("/v1/geolocate", R"({})", "application/json");
  ASSERT_TRUE(conflict);
  EXPECT_EQ(conflict->status, 422);
  EXPECT_EQ(json::parse(conflict->body)["error"]["code"], "payload_conflict");

  auto big = client.Post("/v1/geolocate", std::string(10000, ' '), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);

  auto missing = client.Get("/v1/nothing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(json::parse(missing->body).contains("error"));

  // Concurrent requests against the shared gallery all agree.
  std::vector<std::thread> callers;
  std::atomic<int> good{0};
  for (int t = 0; t < 6; ++t) {
    callers.emplace_back([&] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < 10; ++i) {
        auto r = c.Post("/v1/geolocate", R"({"embedding":[1,0,0,0],"k_pos":2})", "application/json");
        if (r && r->status == 200 && json::parse(r->body)["prediction"] == json::parse(ok->body)["prediction"]) ++good;
      }
    });
  }
  for (auto& t : callers) t.join();
  EXPECT_EQ(good.load(), 60);

  svc.stop();
  serving.join();
}

TEST_F(ServiceTest, ConfigFileResolvesRelativePaths) {
  std::ofstream(dir_ / "service.json") << R"({
    "listen": {"host": "0.0.0.0", "port": 9000},
    "gallery_path": "g.bin",
    "k_pos": 8,
    "default_provider": "nearest-neighbor",
    "providers": {"remote": {"kind": "remote-chat", "endpoint": "http://localhost:1/x", "credential_env": "K"}}
  })";
  const auto cfg = load_service_config(dir_ / "service.json");
  EXPECT_EQ(cfg.gallery_path, dir_ / "g.bin");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.k_pos, 8);
  EXPECT_EQ(cfg.k_neg, 16);
  EXPECT_EQ(cfg.body_limit_bytes, 20u * 1024 * 1024);
  EXPECT_EQ(cfg.providers.size(), 3u);

  EXPECT_THROW(service_config_from_json(json::parse(R"({"gallery_path":"g","default_provider":"x"})")), Error);
  EXPECT_THROW(service_config_from_json(json::parse(R"({"k_pos":3})")), Error);
  config_.gallery_path = dir_ / "missing.bin";
  EXPECT_THROW(GeoService{config_}, Error);
}

}  // namespace
}  // namespace geoanchor
