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


#include "geoanchor/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "geoanchor/encoding.hpp"
#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> to_number(const std::string& text) {
  std::string_view s = text;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Calls `fn(line_no, fields)` for each data row; skips blanks, comments and a
// header row whose latitude column is not numeric.
template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::size_t lat_column, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    auto fields = split_csv(line);
    const bool header = first_row && fields.size() > lat_column && !to_number(fields[lat_column]);
    first_row = false;
    if (header) continue;
    fn(line_no, fields);
  }
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::string format_radius(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

std::string csv_escape(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<double> distance_column(const std::vector<QueryRecord>& records) {
  std::vector<double> distances;
  distances.reserve(records.size());
  for (const auto& r : records) {
    distances.push_back(r.distance_km.value_or(std::numeric_limits<double>::infinity()));
  }
  return distances;
}

std::string render_markdown(const EvalReport& report) {
  std::ostringstream out;
  out << "| Dataset | Method |";
  for (double r : report.accuracy.radii_km) out << ' ' << radius_label(r) << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < report.accuracy.radii_km.size(); ++i) out << "---:|";
  out << "\n| " << report.dataset << " | " << report.method << " |";
  for (double f : report.accuracy.fractions) out << ' ' << format_fixed(f * 100.0, 2) << " |";
  out << '\n';
  if (!report.records.empty()) {
    out << "\nqueries: " << report.records.size() << ", failures: " << report.failure_count()
        << ", k_pos: " << report.config.k_pos << ", k_neg: " << report.config.k_neg
        << ", provider: " << report.config.provider;
    if (!report.config.template_hash.empty()) {
      out << ", template: " << report.config.template_hash.substr(0, 12);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "# dataset=" << report.dataset << "\n# method=" << report.method
      << "\n# k_pos=" << report.config.k_pos << "\n# k_neg=" << report.config.k_neg
      << "\n# provider=" << report.config.provider
      << "\n# template_hash=" << report.config.template_hash << '\n';
  for (std::size_t i = 0; i < report.accuracy.radii_km.size(); ++i) {
    out << "# a_" << format_radius(report.accuracy.radii_km[i])
        << "km=" << format_fixed(report.accuracy.fractions[i] * 100.0, 2) << '\n';
  }
  out << "query_id,pred_lat,pred_lon,true_lat,true_lon,distance_km,fallback_used,latency_ms,error\n";
  for (const auto& r : report.records) {
    out << csv_escape(r.id) << ',';
    if (r.predicted) {
      out << format_fixed(r.predicted->lat(), 6) << ',' << format_fixed(r.predicted->lon(), 6);
    } else {
      out << ',';
    }
    out << ',' << format_fixed(r.truth.lat(), 6) << ',' << format_fixed(r.truth.lon(), 6) << ',';
    if (r.distance_km) out << format_fixed(*r.distance_km, 6);
    out << ',' << (r.fallback_used ? "true" : "false") << ',' << format_fixed(r.latency_ms, 3)
        << ',' << csv_escape(r.error) << '\n';
  }
  return out.str();
}

std::optional<ImagePayload> load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read image " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return ImagePayload{sniff_image_media_type(bytes), base64_encode(bytes)};
}

}  // namespace

std::string radius_label(double radius_km) {
  static const std::pair<double, const char*> kLevels[] = {
      {1.0, "Street"}, {25.0, "City"}, {200.0, "Region"}, {750.0, "Country"}, {2500.0, "Continent"}};
  for (const auto& [r, name] : kLevels) {
    if (r == radius_km) return std::string(name) + ' ' + format_radius(r) + " km";
  }
  return format_radius(radius_km) + " km";
}

EvalDataset load_dataset(const std::filesystem::path& manifest,
                         const std::filesystem::path& embeddings, std::string name) {
  EvalDataset dataset;
  dataset.name = name.empty() ? manifest.stem().string() : std::move(name);
  const auto base = manifest.parent_path();

  for_each_row(manifest, 1, [&](std::size_t line_no, const std::vector<std::string>& f) {
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (f.size() < 3 || f.size() > 4) {
      throw Error(ErrorCode::kParse, where + ": expected query_id,lat,lon[,image_path]");
    }
    const auto lat = to_number(f[1]);
    const auto lon = to_number(f[2]);
    if (!lat || !lon) throw Error(ErrorCode::kParse, where + ": coordinate is not a number");
    EvalQuery q;
    q.id = f[0];
    try {
      q.truth = GeoCoordinate(*lat, *lon);
    } catch (const Error& e) {
      throw Error(ErrorCode::kRange, where + " (query " + q.id + "): " + e.what());
    }
    q.embedding_index = dataset.queries.size();
    if (f.size() == 4 && !f[3].empty()) {
      std::filesystem::path p = f[3];
      q.image_path = p.is_absolute() ? p : base / p;
    }
    dataset.queries.push_back(std::move(q));
  });
  if (dataset.queries.empty()) {
    throw Error(ErrorCode::kInvalidArgument, manifest.string() + ": manifest has no queries");
  }

  dataset.embeddings = read_query_file(embeddings);
  if (dataset.embeddings.size() != dataset.queries.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "manifest has " + std::to_string(dataset.queries.size()) +
                    " rows but the embedding file has " +
                    std::to_string(dataset.embeddings.size()) + " queries");
  }
  return dataset;
}

std::size_t EvalReport::failure_count() const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [](const QueryRecord& r) { return !r.predicted; }));
}

AccuracyTable EvalReport::recompute_accuracy() const {
  return accuracy_from_distances(RadiusThresholds(accuracy.radii_km), distance_column(records));
}

EvalReport score_records(std::string dataset, std::string method, std::vector<QueryRecord> records,
                         const RadiusThresholds& thresholds) {
  for (auto& r : records) {
    r.distance_km = r.predicted ? std::optional(distance_km(*r.predicted, r.truth)) : std::nullopt;
  }
  EvalReport report;
  report.dataset = std::move(dataset);
  report.method = std::move(method);
  report.accuracy = accuracy_from_distances(thresholds, distance_column(records));
  report.records = std::move(records);
  return report;
}

EvalReport run_eval(const EvalDataset& dataset, const FlatIndex& index, Gateway& gateway,
                    const ProviderConfig& provider, const EvalOptions& options) {
  if (dataset.embeddings.dim != index.gallery().dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                "dataset embeddings have dimension " + std::to_string(dataset.embeddings.dim) +
                    " but the gallery has " + std::to_string(index.gallery().dim()));
  }
  if (dataset.queries.empty()) throw Error(ErrorCode::kInvalidArgument, "dataset has no queries");
  if (options.k_pos <= 0 || options.k_neg <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "k_pos and k_neg must be positive");
  }
  provider.validate();

  const bool remote = provider.kind == ProviderKind::kRemoteChat;
  std::vector<QueryRecord> records(dataset.queries.size());

  auto run_one = [&](std::size_t i) {
    const EvalQuery& q = dataset.queries[i];
    QueryRecord& rec = records[i];
    rec.id = q.id;
    rec.truth = q.truth;
    try {
      const auto neighbors =
          index.search(dataset.embeddings.query(q.embedding_index), options.k_pos, options.k_neg);
      std::optional<ImagePayload> image;
      if (remote && q.image_path) image = load_image(*q.image_path);
      const auto prompt = build_prompt(neighbors, options.prompt_template, std::move(image));
      const auto prediction = gateway.geolocate(prompt, provider);
      rec.predicted = prediction.location;
      rec.fallback_used = prediction.fallback_used;
      rec.latency_ms = prediction.latency_ms;
    } catch (const std::exception& e) {
      rec.predicted.reset();
      rec.error = e.what();
    }
  };

  unsigned workers = options.workers;
  if (workers == 0) {
    workers = remote ? static_cast<unsigned>(provider.max_in_flight)
                     : std::max(1u, std::thread::hardware_concurrency());
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, records.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) run_one(i);
      });
    }
  }

  EvalReport report = score_records(dataset.name, options.method.empty() ? provider.name : options.method,
                                    std::move(records), options.thresholds);
  report.config = {options.k_pos, options.k_neg, provider.name, options.prompt_template.hash()};
  return report;
}

std::vector<QueryRecord> load_prediction_records(const std::filesystem::path& path) {
  std::vector<QueryRecord> records;
  for_each_row(path, 3, [&](std::size_t line_no, const std::vector<std::string>& f) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 5) {
      throw Error(ErrorCode::kParse, where + ": expected query_id,pred_lat,pred_lon,true_lat,true_lon");
    }
    QueryRecord rec;
    rec.id = f[0];
    const auto tlat = to_number(f[3]);
    const auto tlon = to_number(f[4]);
    if (!tlat || !tlon) throw Error(ErrorCode::kParse, where + ": truth coordinate is not a number");
    try {
      rec.truth = GeoCoordinate(*tlat, *tlon);
      if (!f[1].empty() || !f[2].empty()) {
        const auto plat = to_number(f[1]);
        const auto plon = to_number(f[2]);
        if (!plat || !plon) throw Error(ErrorCode::kParse, "predicted coordinate is not a number");
        rec.predicted = GeoCoordinate(*plat, *plon);
      } else {
        rec.error = "no prediction";
      }
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    records.push_back(std::move(rec));
  });
  return records;
}

EvalReport report_from_percentages(std::string dataset, std::string method,
                                   const RadiusThresholds& thresholds,
                                   const std::vector<double>& percentages) {
  if (percentages.size() != thresholds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one percentage per radius is required");
  }
  EvalReport report;
  report.dataset = std::move(dataset);
  report.method = std::move(method);
  report.accuracy.radii_km = thresholds.radii();
  for (double p : percentages) {
    if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::kRange, "percentage outside [0, 100]");
    report.accuracy.fractions.push_back(p / 100.0);
  }
  return report;
}

ReportFormat report_format_from_string(std::string_view text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "md" || text == "markdown") return ReportFormat::kMarkdown;
  throw Error(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(text) + "'");
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: return render_csv(report);
    case ReportFormat::kMarkdown: return render_markdown(report);
  }
  return {};
}

json report_to_json(const EvalReport& report) {
  json accuracy = json::array();
  for (std::size_t i = 0; i < report.accuracy.radii_km.size(); ++i) {
    accuracy.push_back({{"radius_km", report.accuracy.radii_km[i]},
                        {"label", radius_label(report.accuracy.radii_km[i])},
                        {"fraction", report.accuracy.fractions[i]},
                        {"percent", report.accuracy.fractions[i] * 100.0}});
  }
  json records = json::array();
  for (const auto& r : report.records) {
    json rec{{"id", r.id},
             {"truth", {{"lat", r.truth.lat()}, {"lon", r.truth.lon()}}},
             {"fallback_used", r.fallback_used},
             {"latency_ms", r.latency_ms},
             {"error", r.error}};
    rec["predicted"] = r.predicted ? json{{"lat", r.predicted->lat()}, {"lon", r.predicted->lon()}}
                                   : json(nullptr);
    rec["distance_km"] = r.distance_km ? json(*r.distance_km) : json(nullptr);
    records.push_back(std::move(rec));
  }
  return json{{"dataset", report.dataset},
              {"method", report.method},
              {"query_count", report.accuracy.query_count},
              {"failures", report.failure_count()},
              {"accuracy", accuracy},
              {"config",
               {{"k_pos", report.config.k_pos},
                {"k_neg", report.config.k_neg},
                {"provider", report.config.provider},
                {"template_hash", report.config.template_hash}}},
              {"records", records}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport report;
    report.dataset = j.at("dataset").get<std::string>();
    report.method = j.at("method").get<std::string>();
    report.accuracy.query_count = j.at("query_count").get<std::size_t>();
    for (const auto& a : j.at("accuracy")) {
      report.accuracy.radii_km.push_back(a.at("radius_km").get<double>());
      report.accuracy.fractions.push_back(a.at("fraction").get<double>());
    }
    const auto& cfg = j.at("config");
    report.config.k_pos = cfg.at("k_pos").get<int>();
    report.config.k_neg = cfg.at("k_neg").get<int>();
    report.config.provider = cfg.at("provider").get<std::string>();
    report.config.template_hash = cfg.at("template_hash").get<std::string>();
    for (const auto& r : j.at("records")) {
      QueryRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.truth = GeoCoordinate(r.at("truth").at("lat").get<double>(), r.at("truth").at("lon").get<double>());
      if (!r.at("predicted").is_null()) {
        rec.predicted = GeoCoordinate(r["predicted"].at("lat").get<double>(),
                                      r["predicted"].at("lon").get<double>());
      }
      if (!r.at("distance_km").is_null()) rec.distance_km = r["distance_km"].get<double>();
      rec.fallback_used = r.at("fallback_used").get<bool>();
      rec.latency_ms = r.at("latency_ms").get<double>();
      rec.error = r.at("error").get<std::string>();
      report.records.push_back(std::move(rec));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed report: ") + e.what());
  }
}

}  // namespace geoanchor
