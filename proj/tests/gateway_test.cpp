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

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "geoanchor/error.hpp"
#include "geoanchor/extractor_client.hpp"
#include "support/stub_server.hpp"

namespace geoanchor {
namespace {

using json = nlohmann::json;
using testing::chat_reply;
using testing::StubServer;

GeoPrompt sample_prompt() {
  GeoPrompt prompt;
  prompt.text = "where is this?";
  prompt.image = ImagePayload{"image/jpeg", "AAEC"};
  prompt.pos_anchors = {{0, 10}, {0, 20}};
  prompt.neg_anchors = {{50, 50}};
  return prompt;
}

ProviderConfig remote(const StubServer& stub) {
  ProviderConfig cfg;
  cfg.name = "stub";
  cfg.kind = ProviderKind::kRemoteChat;
  cfg.endpoint = stub.url("/v1/chat/completions");
  cfg.model = "test-model";
  cfg.timeout_seconds = 5;
  return cfg;
}

// Records requested backoff delays instead of sleeping.
struct RecordingSleeper {
  std::shared_ptr<std::vector<double>> delays = std::make_shared<std::vector<double>>();
  Gateway::Sleeper fn() {
    auto d = delays;
    return [d](std::chrono::duration<double> s) { d->push_back(s.count()); };
  }
};

class GatewayStubTest : public ::testing::Test {
 protected:
  void serve(std::function<void(const httplib::Request&, httplib::Response&, int)> handler) {
    stub_.server.Post("/v1/chat/completions", [this, handler](const httplib::Request& req,
                                                              httplib::Response& res) {
      int n;
      {
        std::lock_guard lock(mutex_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
        n = static_cast<int>(bodies_.size());
      }
      handler(req, res, n);
    });
    stub_.start();
  }

  int calls() {
    std::lock_guard lock(mutex_);
    return static_cast<int>(bodies_.size());
  }

  StubServer stub_;
  std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
  RecordingSleeper sleeper_;
};

TEST_F(GatewayStubTest, WellFormedReplyParses) {
  serve([](auto&, auto& res, int) { res.set_content(chat_reply("48.8566, 2.3522"), "application/json"); });
  Gateway gateway(sleeper_.fn());
  const auto p = gateway.geolocate(sample_prompt(), remote(stub_));
  EXPECT_EQ(p.location, GeoCoordinate(48.8566, 2.3522));
  EXPECT_FALSE(p.fallback_used);
  EXPECT_EQ(p.raw_response, "48.8566, 2.3522");
  EXPECT_EQ(p.provider, "stub");
  EXPECT_GE(p.latency_ms, 0.0);
  EXPECT_EQ(calls(), 1);
}

TEST_F(GatewayStubTest, RequestHasChatCompletionsShape) {
  serve([](auto&, auto& res, int) { res.set_content(chat_reply("1, 2"), "application/json"); });
  auto cfg = remote(stub_);
  cfg.params = {{"max_tokens", 64}};
  Gateway(sleeper_.fn()).geolocate(sample_prompt(), cfg);
  const auto body = json::parse(bodies_.at(0));
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["max_tokens"], 64);
  ASSERT_EQ(body["messages"].size(), 1u);
  const auto& msg = body["messages"][0];
  EXPECT_EQ(msg["role"], "user");
  ASSERT_EQ(msg["content"].size(), 2u);
  EXPECT_EQ(msg["content"][0]["type"], "text");
  EXPECT_EQ(msg["content"][0]["text"], "where is this?");
  EXPECT_EQ(msg["content"][1]["type"], "image_url");
  EXPECT_EQ(msg["content"][1]["image_url"]["url"], "data:image/jpeg;base64,AAEC");
}

TEST_F(GatewayStubTest, TooManyRequestsTwiceThenSuccess) {
  serve([](auto&, auto& res, int n) {
    if (n <= 2) {
      res.status = 429;
      return;
    }
    res.set_content(chat_reply("10, 20"), "application/json");
  });
  Gateway gateway(sleeper_.fn());
  const auto p = gateway.geolocate(sample_prompt(), remote(stub_));
  EXPECT_EQ(p.location, GeoCoordinate(10, 20));
  EXPECT_EQ(calls(), 3);
  // Backoff base 1 s, factor 2, jitter 20%.
  ASSERT_EQ(sleeper_.delays->size(), 2u);
  EXPECT_GE((*sleeper_.delays)[0], 0.8);
  EXPECT_LE((*sleeper_.delays)[0], 1.2);
  EXPECT_GE((*sleeper_.delays)[1], 1.6);
  EXPECT_LE((*sleeper_.delays)[1], 2.4);
}

TEST_F(GatewayStubTest, PersistentServerErrorExhaustsRetries) {
  serve([](auto&, auto& res, int) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  Gateway gateway(sleeper_.fn());
  try {
    gateway.geolocate(sample_prompt(), remote(stub_));
    FAIL() << "expected a transport error";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTransport);
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(calls(), 3);
}

TEST_F(GatewayStubTest, ClientErrorIsNotRetried) {
  serve([](auto&, auto& res, int) { res.status = 400; });
  try {
    Gateway(sleeper_.fn()).remote_chat_call(sample_prompt(), remote(stub_));
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 1);
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(calls(), 1);
}

TEST_F(GatewayStubTest, UnparseableReplyFallsBackToMidpoint) {
  serve([](auto&, auto& res, int) {
    res.set_content(chat_reply("I cannot determine where this photo was taken."), "application/json");
  });
  Gateway gateway(sleeper_.fn());
  const auto p = gateway.geolocate(sample_prompt(), remote(stub_));
  EXPECT_TRUE(p.fallback_used);
  EXPECT_NEAR(p.location.lat(), 0.0, 1e-9);
  EXPECT_NEAR(p.location.lon(), 15.0, 1e-9);
  EXPECT_NE(p.raw_response.find("cannot determine"), std::string::npos);
  EXPECT_EQ(calls(), 3);

  // Each parse retry carries the earlier reply and the clarification.
  const auto third = json::parse(bodies_.at(2));
  ASSERT_EQ(third["messages"].size(), 5u);
  EXPECT_EQ(third["messages"][1]["role"], "assistant");
  EXPECT_EQ(third["messages"][2]["content"], std::string(kClarificationMessage));
  EXPECT_EQ(third["messages"][4]["content"], std::string(kClarificationMessage));
}

TEST_F(GatewayStubTest, ClarificationRecoversOnSecondTry) {
  serve([](auto&, auto& res, int n) {
    res.set_content(chat_reply(n == 1 ? "Somewhere in France." : "45.0, 1.5"), "application/json");
  });
  const auto p = Gateway(sleeper_.fn()).geolocate(sample_prompt(), remote(stub_));
  EXPECT_FALSE(p.fallback_used);
  EXPECT_EQ(p.location, GeoCoordinate(45.0, 1.5));
  EXPECT_EQ(calls(), 2);
}

TEST_F(GatewayStubTest, FallbackWithoutAnchorsIsAPredictionError) {
  serve([](auto&, auto& res, int) { res.set_content(chat_reply("no idea"), "application/json"); });
  auto prompt = sample_prompt();
  prompt.pos_anchors.clear();
  try {
    Gateway(sleeper_.fn()).geolocate(prompt, remote(stub_));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrediction);
  }
}

TEST_F(GatewayStubTest, CredentialFromEnvironmentAndNeverLeaked) {
  serve([](const httplib::Request& req, auto& res, int) {
    res.status = 401;
    res.set_content("bad key " + req.get_header_value("Authorization"), "text/plain");
  });
  auto cfg = remote(stub_);
  cfg.credential_env = "GEOANCHOR_TEST_KEY";
  ::unsetenv("GEOANCHOR_TEST_KEY");
  try {
    Gateway(sleeper_.fn()).geolocate(sample_prompt(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("GEOANCHOR_TEST_KEY"), std::string::npos);
  }
  EXPECT_EQ(calls(), 0);

  ::setenv("GEOANCHOR_TEST_KEY", "sk-very-secret-value", 1);
  try {
    Gateway(sleeper_.fn()).geolocate(sample_prompt(), cfg);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(std::string(e.what()).find("sk-very-secret-value"), std::string::npos);
    EXPECT_EQ(e.status(), 401);
  }
  ::unsetenv("GEOANCHOR_TEST_KEY");
  EXPECT_EQ(auth_.at(0), "Bearer sk-very-secret-value");
}

TEST(GatewayTest, UnreachableEndpointIsTransportError) {
  // Grab a free port, then close it so nothing listens there.
  int port;
  {
    StubServer probe;
    probe.start();
    port = probe.port();
  }
  ProviderConfig cfg;
  cfg.name = "down";
  cfg.kind = ProviderKind::kRemoteChat;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.timeout_seconds = 2;
  RecordingSleeper sleeper;
  try {
    Gateway(sleeper.fn()).geolocate(sample_prompt(), cfg);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.status(), 0);
  }
  EXPECT_EQ(sleeper.delays->size(), 2u);
}

TEST(GatewayTest, InFlightCapIsEnforced) {
  std::atomic<int> current{0}, peak{0}, total{0};
  StubServer stub;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    --current;
    ++total;
    res.set_content(chat_reply("1, 1"), "application/json");
  });
  stub.start();

  ProviderConfig cfg = remote(stub);
  cfg.max_in_flight = 2;
  Gateway gateway;
  std::vector<std::thread> callers;
  for (int i = 0; i < 6; ++i) {
    callers.emplace_back([&] { gateway.geolocate(sample_prompt(), cfg); });
  }
  for (auto& t : callers) t.join();
  EXPECT_EQ(total.load(), 6);
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(GatewayTest, LocalProviders) {
  Gateway gateway;
  const auto providers = builtin_providers();
  const auto mid = gateway.geolocate(sample_prompt(), providers.at("mock-midpoint"));
  EXPECT_NEAR(mid.location.lat(), 0.0, 1e-12);
  EXPECT_NEAR(mid.location.lon(), 15.0, 1e-12);
  EXPECT_FALSE(mid.fallback_used);

  const auto nn = gateway.geolocate(sample_prompt(), providers.at("nearest-neighbor"));
  EXPECT_EQ(nn.location, GeoCoordinate(0, 10));

  GeoPrompt empty;
  EXPECT_THROW(gateway.geolocate(empty, providers.at("mock-midpoint")), Error);
  EXPECT_THROW(gateway.geolocate(empty, providers.at("nearest-neighbor")), Error);
}

TEST(GatewayTest, ExtractReplyVariants) {
  EXPECT_EQ(Gateway::extract_reply(chat_reply("hello")), "hello");
  const json parts{{"choices", {{{"message", {{"content", {{{"type", "text"}, {"text", "a"}},
                                                            {{"type", "text"}, {"text", "b"}}}}}}}}}};
  EXPECT_EQ(Gateway::extract_reply(parts.dump()), "ab");
  EXPECT_THROW(Gateway::extract_reply("not json"), Error);
  EXPECT_THROW(Gateway::extract_reply(R"({"choices":[]})"), Error);
}

TEST(ProviderConfigTest, JsonParsingAndValidation) {
  const auto providers = provider_configs_from_json(json::parse(R"({
    "providers": {
      "gpt": {"kind": "remote-chat", "endpoint": "https://api.example.com/v1/chat/completions",
              "model": "m", "credential_env": "KEY", "timeout_seconds": 30, "max_retries": 1,
              "max_in_flight": 8, "params": {"max_tokens": 32}}
    }})"));
  ASSERT_EQ(providers.size(), 3u);
  const auto& gpt = providers.at("gpt");
  EXPECT_EQ(gpt.kind, ProviderKind::kRemoteChat);
  EXPECT_EQ(gpt.timeout_seconds, 30);
  EXPECT_EQ(gpt.max_retries, 1);
  EXPECT_EQ(gpt.max_in_flight, 8);
  EXPECT_EQ(gpt.params["max_tokens"], 32);
  EXPECT_EQ(provider_from_json("gpt", provider_to_json(gpt)).endpoint, gpt.endpoint);

  ProviderConfig defaults;
  EXPECT_EQ(defaults.timeout_seconds, 60);
  EXPECT_EQ(defaults.max_retries, 2);
  EXPECT_EQ(defaults.max_in_flight, 4);

  auto bad = [](const char* text) {
    try {
      provider_from_json("p", json::parse(text));
    } catch (const Error& e) {
      return e.code() == ErrorCode::kConfig;
    }
    return false;
  };
  EXPECT_TRUE(bad(R"({"kind":"remote-chat","endpoint":"http://x/","api_key":"sk-1"})"));
  EXPECT_TRUE(bad(R"({"kind":"remote-chat","endpoint":"http://x/","timeout_seconds":0})"));
  EXPECT_TRUE(bad(R"({"kind":"remote-chat","endpoint":"http://x/","max_retries":-1})"));
  EXPECT_TRUE(bad(R"({"kind":"remote-chat","endpoint":"http://x/","max_in_flight":0})"));
  EXPECT_TRUE(bad(R"({"kind":"remote-chat"})"));
  EXPECT_TRUE(bad(R"({"kind":"telepathy"})"));
}

TEST(ExtractorClientTest, SidecarContract) {
  StubServer stub;
  stub.server.Post("/v1/embed", [](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Content-Type") != "application/octet-stream" || req.body == "bad") {
      res.status = 400;
      res.set_content(R"({"error":"not an image"})", "application/json");
      return;
    }
    res.set_content(json{{"embedding", {0.6, 0.8}}, {"dim", 2}}.dump(), "application/json");
  });
  stub.server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  stub.start();

  const ExtractorClient client(stub.url("/v1/embed"), 5);
  EXPECT_EQ(client.embed("\xFF\xD8\xFF"), (std::vector<float>{0.6f, 0.8f}));
  try {
    client.embed("bad");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  try {
    ExtractorClient(stub.url("/broken"), 5).embed("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExtractorUnavailable);
  }
  stub.stop();
  try {
    client.embed("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExtractorUnavailable);
  }
}

}  // namespace
}  // namespace geoanchor
