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


// geoanchor: build and validate galleries, run neighbor queries, geolocate
// embeddings or images, evaluate labeled query sets and serve the HTTP API.
//
// Exit codes: 0 success, 1 validation or input error, 2 transport/provider
// error.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "geoanchor/encoding.hpp"
#include "geoanchor/error.hpp"
#include "geoanchor/eval.hpp"
#include "geoanchor/extractor_client.hpp"
#include "geoanchor/flat_index.hpp"
#include "geoanchor/gallery.hpp"
#include "geoanchor/gateway.hpp"
#include "geoanchor/prompt.hpp"
#include "geoanchor/service.hpp"

namespace {

using geoanchor::Error;
using geoanchor::ErrorCode;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitProvider = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTransport:
    case ErrorCode::kPrediction:
    case ErrorCode::kExtractorUnavailable: return kExitProvider;
    default: return kExitInput;
  }
}

std::string hex64(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool has_gallery_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(geoanchor::kGalleryMagic)] = {};
  in.read(magic, sizeof(magic));
  return in.gcount() == sizeof(magic) && std::memcmp(magic, geoanchor::kGalleryMagic, sizeof(magic)) == 0;
}

std::map<std::string, geoanchor::ProviderConfig> providers_from(const std::string& config_path) {
  return config_path.empty() ? geoanchor::builtin_providers()
                             : geoanchor::load_provider_configs(config_path);
}

const geoanchor::ProviderConfig& pick_provider(
    const std::map<std::string, geoanchor::ProviderConfig>& providers, const std::string& name) {
  const auto it = providers.find(name);
  if (it == providers.end()) {
    throw Error(ErrorCode::kConfig, "provider '" + name + "' is not configured");
  }
  return it->second;
}

json hits_json(const std::vector<geoanchor::NeighborHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) {
    out.push_back({{"id", h.id}, {"score", h.score}, {"lat", h.location.lat()}, {"lon", h.location.lon()}});
  }
  return out;
}

struct BuildArgs {
  std::string input;
  std::string output;
  std::uint32_t dim = 0;
};

int run_index_build(const BuildArgs& args) {
  std::vector<geoanchor::EmbeddingRecord> records;
  std::uint32_t dim = args.dim;
  if (has_gallery_magic(args.input)) {
    const auto source = geoanchor::Gallery::open(args.input);
    if (dim != 0 && dim != source.dim()) {
      throw Error(ErrorCode::kInvalidArgument, "input has dimension " + std::to_string(source.dim()));
    }
    dim = source.dim();
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto v = source.vector(i);
      records.push_back({source.id(i), {v.begin(), v.end()}, source.location(i), {}});
    }
  } else {
    records = geoanchor::read_ingestion_text(args.input, dim);
    if (dim == 0 && !records.empty()) dim = static_cast<std::uint32_t>(records.front().vector.size());
  }
  const auto summary = geoanchor::build_gallery(records, dim, args.output);
  std::cout << json{{"count", summary.count}, {"dim", summary.dim}, {"checksum", hex64(summary.checksum)},
                    {"output", args.output}}.dump(2)
            << '\n';
  return kExitOk;
}

int run_index_validate(const std::string& path, bool as_json) {
  const auto report = geoanchor::validate_gallery(path);
  auto status_name = [](geoanchor::CheckStatus s) {
    switch (s) {
      case geoanchor::CheckStatus::kPass: return "pass";
      case geoanchor::CheckStatus::kFail: return "FAIL";
      case geoanchor::CheckStatus::kSkipped: return "skipped";
    }
    return "?";
  };
  if (as_json) {
    json checks = json::array();
    for (const auto& c : report.checks) {
      checks.push_back({{"name", c.name}, {"status", status_name(c.status)}, {"detail", c.detail}});
    }
    std::cout << json{{"path", path}, {"ok", report.ok()}, {"checks", checks}}.dump(2) << '\n';
  } else {
    for (const auto& c : report.checks) {
      std::printf("%-18s %-8s %s\n", c.name.c_str(), status_name(c.status), c.detail.c_str());
    }
    std::printf("%s\n", report.ok() ? "OK" : "INVALID");
  }
  return report.ok() ? kExitOk : kExitInput;
}

struct QueryArgs {
  std::string gallery;
  std::string embeddings;
  int k_pos = geoanchor::kDefaultPositiveK;
  int k_neg = geoanchor::kDefaultNegativeK;
  std::string format = "csv";
  unsigned threads = 0;
};

int run_query(const QueryArgs& args) {
  const geoanchor::FlatIndex index(geoanchor::Gallery::open(args.gallery), {args.threads, 16384});
  const auto queries = geoanchor::read_query_file(args.embeddings);
  if (args.format == "json") {
    json out = json::array();
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto set = index.search(queries.query(q), args.k_pos, args.k_neg);
      out.push_back({{"query", q}, {"positives", hits_json(set.positives)}, {"negatives", hits_json(set.negatives)}});
    }
    std::cout << out.dump(2) << '\n';
  } else if (args.format == "csv") {
    std::cout << "query,kind,rank,id,score,lat,lon\n";
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto set = index.search(queries.query(q), args.k_pos, args.k_neg);
      auto emit = [&](const char* kind, const std::vector<geoanchor::NeighborHit>& hits) {
        for (std::size_t r = 0; r < hits.size(); ++r) {
          std::printf("%zu,%s,%zu,%llu,%.6f,%.6f,%.6f\n", q, kind, r + 1,
                      static_cast<unsigned long long>(hits[r].id), hits[r].score,
                      hits[r].location.lat(), hits[r].location.lon());
        }
      };
      emit("positive", set.positives);
      emit("negative", set.negatives);
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown format '" + args.format + "'");
  }
  return kExitOk;
}

struct GeolocateArgs {
  std::string gallery;
  std::string embeddings;
  std::string image;
  std::string provider = "mock-midpoint";
  std::string provider_config;
  std::string template_path;
  std::string extractor_url;
  std::size_t query_index = 0;
  int k_pos = geoanchor::kDefaultPositiveK;
  int k_neg = geoanchor::kDefaultNegativeK;
};

int run_geolocate(const GeolocateArgs& args) {
  const auto providers = providers_from(args.provider_config);
  const auto& provider = pick_provider(providers, args.provider);
  const auto tmpl = args.template_path.empty() ? geoanchor::PromptTemplate::default_template()
                                               : geoanchor::PromptTemplate::load(args.template_path);
  const geoanchor::FlatIndex index(geoanchor::Gallery::open(args.gallery), {0, 16384});

  std::vector<float> embedding;
  std::optional<geoanchor::ImagePayload> image;
  if (!args.image.empty()) {
    if (args.extractor_url.empty()) {
      throw Error(ErrorCode::kConfig, "--image requires --extractor-url (or pass --embedding-file)");
    }
    const std::string bytes = read_file(args.image);
    embedding = geoanchor::ExtractorClient(args.extractor_url).embed(bytes);
    image = geoanchor::ImagePayload{geoanchor::sniff_image_media_type(bytes), geoanchor::base64_encode(bytes)};
  } else {
    const auto queries = geoanchor::read_query_file(args.embeddings);
    if (args.query_index >= queries.size()) {
      throw Error(ErrorCode::kInvalidArgument, "query index out of range");
    }
    const auto q = queries.query(args.query_index);
    embedding.assign(q.begin(), q.end());
  }

  const auto neighbors = index.search(embedding, args.k_pos, args.k_neg);
  const auto prompt = geoanchor::build_prompt(neighbors, tmpl, std::move(image));
  geoanchor::Gateway gateway;
  const auto prediction = gateway.geolocate(prompt, provider);
  std::cout << json{{"prediction", {{"lat", prediction.location.lat()}, {"lon", prediction.location.lon()}}},
                    {"fallback_used", prediction.fallback_used},
                    {"provider", prediction.provider},
                    {"positives", hits_json(neighbors.positives)},
                    {"negatives", hits_json(neighbors.negatives)},
                    {"prompt_text", prompt.text},
                    {"raw_response", prediction.raw_response},
                    {"latency_ms", prediction.latency_ms}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string gallery;
  std::string manifest;
  std::string queries;
  std::string predictions;
  std::string provider = "mock-midpoint";
  std::string provider_config;
  std::string template_path;
  std::string thresholds = "1,25,200,750,2500";
  std::string report;
  std::string format = "md";
  std::string method;
  std::string dataset_name;
  int k_pos = geoanchor::kDefaultPositiveK;
  int k_neg = geoanchor::kDefaultNegativeK;
  unsigned workers = 0;
};

geoanchor::RadiusThresholds parse_thresholds(const std::string& text) {
  std::vector<double> radii;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      radii.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "invalid threshold '" + item + "'");
    }
  }
  return geoanchor::RadiusThresholds(std::move(radii));
}

int run_eval(const EvalArgs& args) {
  const auto thresholds = parse_thresholds(args.thresholds);
  const auto format = geoanchor::report_format_from_string(args.format);
  geoanchor::EvalReport report;

  if (!args.predictions.empty()) {
    auto records = geoanchor::load_prediction_records(args.predictions);
    const std::string name = args.dataset_name.empty()
                                 ? std::filesystem::path(args.predictions).stem().string()
                                 : args.dataset_name;
    report = geoanchor::score_records(name, args.method.empty() ? "prerecorded" : args.method,
                                      std::move(records), thresholds);
  } else {
    if (args.gallery.empty() || args.manifest.empty() || args.queries.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "eval needs --gallery, --manifest and --queries (or --predictions)");
    }
    const auto providers = providers_from(args.provider_config);
    const auto& provider = pick_provider(providers, args.provider);
    const auto dataset = geoanchor::load_dataset(args.manifest, args.queries, args.dataset_name);
    const geoanchor::FlatIndex index(geoanchor::Gallery::open(args.gallery), {1, 16384});
    geoanchor::EvalOptions options;
    options.k_pos = args.k_pos;
    options.k_neg = args.k_neg;
    options.thresholds = thresholds;
    options.method = args.method;
    options.workers = args.workers;
    if (!args.template_path.empty()) options.prompt_template = geoanchor::PromptTemplate::load(args.template_path);
    geoanchor::Gateway gateway;
    report = geoanchor::run_eval(dataset, index, gateway, provider, options);
  }

  if (!args.report.empty()) {
    std::ofstream out(args.report, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + args.report);
    out << geoanchor::render_report(report, format);
  }
  std::cout << geoanchor::render_report(report, geoanchor::ReportFormat::kMarkdown);

  const auto failures = report.failure_count();
  if (failures > 0 && args.predictions.empty()) {
    std::cerr << failures << " queries failed; first error: ";
    for (const auto& r : report.records) {
      if (!r.predicted) {
        std::cerr << r.error << '\n';
        break;
      }
    }
    return kExitProvider;
  }
  return kExitOk;
}

int run_serve(const std::string& config_path) {
  // Block termination signals in every thread; a dedicated thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  geoanchor::GeoService service(geoanchor::load_service_config(config_path));
  const int port = service.bind();
  std::cerr << "serving " << service.index().gallery().size() << " records on "
            << service.config().host << ':' << port << std::endl;

  std::jthread waiter([&service, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.listen();
  // Wake the waiter if the server stopped on its own.
  if (waiter.joinable()) pthread_kill(waiter.native_handle(), SIGTERM);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoanchor: retrieval-augmented image geolocalization"};
  app.require_subcommand(1);

  auto* index_cmd = app.add_subcommand("index", "Build or validate a gallery file");
  index_cmd->require_subcommand(1);

  BuildArgs build;
  auto* build_cmd = index_cmd->add_subcommand("build", "Build a gallery from id,lat,lon,v... rows");
  build_cmd->add_option("--input", build.input, "Ingestion text or gallery file")->required();
  build_cmd->add_option("--output", build.output, "Gallery file to write")->required();
  build_cmd->add_option("--dim", build.dim, "Embedding dimension (inferred when omitted)");

  std::string validate_path;
  bool validate_json = false;
  auto* validate_cmd = index_cmd->add_subcommand("validate", "Check a gallery file");
  validate_cmd->add_option("gallery", validate_path, "Gallery file")->required();
  validate_cmd->add_flag("--json", validate_json, "Print the report as JSON");

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "List positive and negative neighbors");
  query_cmd->add_option("--gallery", query.gallery)->required();
  query_cmd->add_option("--embedding-file", query.embeddings)->required();
  query_cmd->add_option("--k-pos", query.k_pos)->check(CLI::PositiveNumber);
  query_cmd->add_option("--k-neg", query.k_neg)->check(CLI::PositiveNumber);
  query_cmd->add_option("--format", query.format)->check(CLI::IsMember({"csv", "json"}));
  query_cmd->add_option("--threads", query.threads, "Scan threads (0 = all cores)");

  GeolocateArgs geo;
  auto* geo_cmd = app.add_subcommand("geolocate", "Predict coordinates for one query");
  geo_cmd->add_option("--gallery", geo.gallery)->required();
  auto* emb_opt = geo_cmd->add_option("--embedding-file", geo.embeddings);
  auto* img_opt = geo_cmd->add_option("--image", geo.image);
  emb_opt->excludes(img_opt);
  geo_cmd->add_option("--query-index", geo.query_index, "Row of the embedding file to use");
  geo_cmd->add_option("--provider", geo.provider)->required();
  geo_cmd->add_option("--provider-config", geo.provider_config, "Provider JSON config");
  geo_cmd->add_option("--template", geo.template_path);
  geo_cmd->add_option("--extractor-url", geo.extractor_url, "Embedding sidecar, e.g. http://127.0.0.1:9000/v1/embed");
  geo_cmd->add_option("--k-pos", geo.k_pos)->check(CLI::PositiveNumber);
  geo_cmd->add_option("--k-neg", geo.k_neg)->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a labeled query set");
  eval_cmd->add_option("--gallery", ev.gallery);
  eval_cmd->add_option("--manifest", ev.manifest, "query_id,lat,lon[,image_path] rows");
  eval_cmd->add_option("--queries", ev.queries, "Query embedding file");
  eval_cmd->add_option("--predictions", ev.predictions,
                       "Prerecorded query_id,pred_lat,pred_lon,true_lat,true_lon rows");
  eval_cmd->add_option("--provider", ev.provider);
  eval_cmd->add_option("--provider-config", ev.provider_config);
  eval_cmd->add_option("--template", ev.template_path);
  eval_cmd->add_option("--thresholds", ev.thresholds);
  eval_cmd->add_option("--report", ev.report, "Report file to write");
  eval_cmd->add_option("--format", ev.format)->check(CLI::IsMember({"md", "markdown", "json", "csv"}));
  eval_cmd->add_option("--method", ev.method, "Method label for the report");
  eval_cmd->add_option("--dataset-name", ev.dataset_name);
  eval_cmd->add_option("--k-pos", ev.k_pos)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--k-neg", ev.k_neg)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--workers", ev.workers, "Concurrent queries (0 = auto)");

  std::string serve_config;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", serve_config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*build_cmd) return run_index_build(build);
    if (*validate_cmd) return run_index_validate(validate_path, validate_json);
    if (*query_cmd) return run_query(query);
    if (*geo_cmd) {
      if (geo.embeddings.empty() && geo.image.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "geolocate needs --embedding-file or --image");
      }
      return run_geolocate(geo);
    }
    if (*eval_cmd) return run_eval(ev);
    if (*serve_cmd) return run_serve(serve_config);
  } catch (const Error& e) {
    std::cerr << "error [" << geoanchor::to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
