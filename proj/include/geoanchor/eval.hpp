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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoanchor/flat_index.hpp"
#include "geoanchor/gallery.hpp"
#include "geoanchor/gateway.hpp"
#include "geoanchor/geodesy.hpp"
#include "geoanchor/prompt.hpp"

namespace geoanchor {

struct EvalQuery {
  std::string id;
  GeoCoordinate truth;
  std::size_t embedding_index = 0;  // row in EvalDataset::embeddings
  std::optional<std::filesystem::path> image_path;
};

struct EvalDataset {
  std::string name;
  std::vector<EvalQuery> queries;
  QuerySet embeddings;
};

/// Reads a `query_id,lat,lon[,image_path]` manifest (optional header row)
/// and pairs its rows with the query-embedding file by position. Relative
/// image paths resolve against the manifest's directory.
EvalDataset load_dataset(const std::filesystem::path& manifest,
                         const std::filesystem::path& embeddings, std::string name = {});

struct QueryRecord {
  std::string id;
  std::optional<GeoCoordinate> predicted;  // empty when the query failed
  GeoCoordinate truth;
  std::optional<double> distance_km;
  bool fallback_used = false;
  double latency_ms = 0.0;
  std::string error;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct RunConfig {
  int k_pos = 0;
  int k_neg = 0;
  std::string provider;
  std::string template_hash;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct EvalReport {
  std::string dataset;
  std::string method;
  AccuracyTable accuracy;
  std::vector<QueryRecord> records;
  RunConfig config;

  std::size_t failure_count() const;
  /// Accuracy recomputed from the per-query distance column.
  AccuracyTable recompute_accuracy() const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalOptions {
  int k_pos = kDefaultPositiveK;
  int k_neg = kDefaultNegativeK;
  RadiusThresholds thresholds;
  PromptTemplate prompt_template = PromptTemplate::default_template();
  std::string method;  // defaults to the provider name
  /// Concurrent queries; 0 picks max_in_flight for remote providers and the
  /// hardware concurrency for local ones.
  unsigned workers = 0;
};

/// search -> build_prompt -> geolocate -> distance for every query. Failed
/// queries are kept with an error and count as misses at every radius.
EvalReport run_eval(const EvalDataset& dataset, const FlatIndex& index, Gateway& gateway,
                    const ProviderConfig& provider, const EvalOptions& options);

/// Builds a report from already-made predictions (no retrieval or provider).
EvalReport score_records(std::string dataset, std::string method, std::vector<QueryRecord> records,
                         const RadiusThresholds& thresholds);

/// Reads `query_id,pred_lat,pred_lon,true_lat,true_lon` rows; empty
/// prediction fields mark a failed query.
std::vector<QueryRecord> load_prediction_records(const std::filesystem::path& path);

/// A report carrying only an accuracy table (e.g. published figures).
EvalReport report_from_percentages(std::string dataset, std::string method,
                                   const RadiusThresholds& thresholds,
                                   const std::vector<double>& percentages);

enum class ReportFormat { kJson, kCsv, kMarkdown };
ReportFormat report_format_from_string(std::string_view text);

std::string render_report(const EvalReport& report, ReportFormat format);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Column heading for a radius: the named level for the five default radii
/// ("Street 1 km", ...), otherwise "<r> km".
std::string radius_label(double radius_km);

}  // namespace geoanchor
