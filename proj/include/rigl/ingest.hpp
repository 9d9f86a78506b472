// Copyright 2026 The RIGL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Check-in and taxi ingestion, grid segmentation and per-window traffic
// context matrices.

#ifndef RIGL_INGEST_HPP_
#define RIGL_INGEST_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rigl/common.hpp"

namespace rigl {

using Timestamp = std::int64_t;  // UTC seconds since the epoch

struct CheckinEvent {
  std::string user_id;
  std::string poi_id;
  std::string category_id;
  std::string category_name;
  double lat = 0.0;
  double lon = 0.0;
  Timestamp timestamp = 0;
};

struct TaxiTrip {
  std::string trip_id;
  double pickup_lat = 0.0;
  double pickup_lon = 0.0;
  double dropoff_lat = 0.0;
  double dropoff_lon = 0.0;
  Timestamp pickup_time = 0;
  Timestamp dropoff_time = 0;
};

enum class TimeFormat { kAuto, kEpoch, kIso8601, kFoursquare };

// A column is addressed either by zero-based position or by header name.
using ColumnRef = std::variant<std::size_t, std::string>;

struct ColumnMapping {
  char delimiter = ',';
  bool header = true;
  TimeFormat time_format = TimeFormat::kAuto;
  // Field name -> column. Missing fields fall back to the positional default
  // order listed by checkin_fields() / taxi_fields().
  std::map<std::string, ColumnRef> columns;
};

const std::vector<std::string>& checkin_fields();
const std::vector<std::string>& taxi_fields();

struct ParseReport {
  std::string path;
  std::size_t total_rows = 0;
  std::size_t valid_rows = 0;
  std::size_t skipped_rows = 0;
  std::map<std::string, std::size_t> skip_reasons;
};

template <typename Record>
struct Parsed {
  std::vector<Record> records;
  ParseReport report;
};

// Accepts epoch seconds, ISO-8601 ("2012-04-03T18:00:00Z", optional
// fraction and offset) and the Foursquare dump style
// ("Tue Apr 03 18:00:09 +0000 2012").
std::optional<Timestamp> parse_timestamp(std::string_view text, TimeFormat format);

// Splits one delimiter-separated line, honouring double-quoted fields.
std::vector<std::string> split_record(std::string_view line, char delimiter);

Parsed<CheckinEvent> parse_checkins(const std::string& path, const ColumnMapping& format);
Parsed<TaxiTrip> parse_taxi(const std::string& path, const ColumnMapping& format);

// In-memory variants used by the file readers and by tests.
Parsed<CheckinEvent> parse_checkins_text(std::string_view text, const ColumnMapping& format,
                                         const std::string& source = "<memory>");
Parsed<TaxiTrip> parse_taxi_text(std::string_view text, const ColumnMapping& format,
                                 const std::string& source = "<memory>");

struct GridSpec {
  double lat_min = 0.0;
  double lat_max = 1.0;
  double lon_min = 0.0;
  double lon_max = 1.0;
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t cells() const { return rows * cols; }
  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
  void validate() const;
  // Centre coordinates of a cell.
  std::pair<double, double> center(std::size_t cell) const;
};

// Row-major cell index. Cells are half-open [lo, hi) except along the global
// maximum edges, which belong to the last row/column. Points outside the
// bounding box yield std::nullopt.
std::optional<std::size_t> cell_of(double lat, double lon, const GridSpec& grid);

// Nearest cell for any point; out-of-box coordinates are clamped onto the box.
std::size_t nearest_cell(double lat, double lon, const GridSpec& grid);

enum TrafficColumn : int { kInner = 0, kInflow = 1, kOutflow = 2 };

struct TemporalContext {
  std::int64_t window_id = 0;
  Timestamp start = 0;
  Timestamp end = 0;
  Mat traffic;  // cells x 3: inner, in-flow, out-flow
};

// One context per window between the first and last pickup (inclusive, empty
// windows included). Windows are aligned to multiples of window_len since the
// epoch; a trip belongs to the window holding its pickup time.
std::vector<TemporalContext> compute_temporal_contexts(std::span<const TaxiTrip> trips,
                                                       const GridSpec& grid,
                                                       Timestamp window_len);

// The context whose window holds `time`, else the latest window starting at or
// before it, else an all-zero matrix with `cells` rows.
// Position of that context in `contexts`, or -1 for the zero context.
std::int64_t context_index(Timestamp time, std::span<const TemporalContext> contexts);
TemporalContext context_for(Timestamp time, std::span<const TemporalContext> contexts,
                            std::size_t cells);

// Columnar text cache: "window_id start end cell inner inflow outflow" rows.
void write_contexts(const std::string& path, std::span<const TemporalContext> contexts,
                    std::size_t cells);
std::vector<TemporalContext> read_contexts(const std::string& path, std::size_t cells);

void log_parse_report(const ParseReport& report);

}  // namespace rigl

#endif  // RIGL_INGEST_HPP_
