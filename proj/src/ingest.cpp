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

#include "rigl/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rigl {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Timestamp to_epoch(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  const sys_days days{ymd};
  return days.time_since_epoch().count() * 86400LL + h * 3600LL + mi * 60LL + s;
}

bool valid_clock(int h, int mi, int s) {
  return h >= 0 && h <= 23 && mi >= 0 && mi <= 59 && s >= 0 && s <= 60;
}

bool valid_date(int y, unsigned mo, unsigned d) {
  using namespace std::chrono;
  return year_month_day{year{y}, month{mo}, day{d}}.ok();
}

// "+0000", "+00:00", "-05", "Z"
std::optional<Timestamp> parse_offset(std::string_view s) {
  if (s.empty() || s == "Z" || s == "z") return 0;
  const int sign = s.front() == '-' ? -1 : (s.front() == '+' ? 1 : 0);
  if (sign == 0) return std::nullopt;
  s.remove_prefix(1);
  std::string digits;
  for (char c : s) {
    if (c == ':') continue;
    if (c < '0' || c > '9') return std::nullopt;
    digits.push_back(c);
  }
  if (digits.size() != 2 && digits.size() != 4) return std::nullopt;
  const int hh = std::stoi(digits.substr(0, 2));
  const int mm = digits.size() == 4 ? std::stoi(digits.substr(2, 2)) : 0;
  if (hh > 23 || mm > 59) return std::nullopt;
  return sign * (hh * 3600LL + mm * 60LL);
}

std::optional<Timestamp> parse_epoch(std::string_view s) {
  auto v = parse_double(s);
  if (!v) return std::nullopt;
  if (std::abs(*v) > 1e13) return std::nullopt;
  return static_cast<Timestamp>(std::floor(*v));
}

std::optional<Timestamp> parse_iso(std::string_view s) {
  // YYYY-MM-DD[T| ]HH:MM:SS[.frac][offset]
  if (s.size() < 19) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  auto y = parse_int(s.substr(0, 4));
  auto mo = parse_int(s.substr(5, 2));
  auto d = parse_int(s.substr(8, 2));
  auto h = parse_int(s.substr(11, 2));
  auto mi = parse_int(s.substr(14, 2));
  auto sec = parse_int(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
  if (*mo < 1 || *d < 1 || !valid_date(*y, *mo, *d) || !valid_clock(*h, *mi, *sec)) {
    return std::nullopt;
  }
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    std::size_t n = 0;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
    if (n == 0) return std::nullopt;
    rest.remove_prefix(n);
  }
  auto off = parse_offset(rest);
  if (!off) return std::nullopt;
  return to_epoch(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d), *h, *mi, *sec) -
         *off;
}

// "Tue Apr 03 18:00:09 +0000 2012"
std::optional<Timestamp> parse_foursquare(std::string_view s) {
  static constexpr std::array<std::string_view, 12> kMonths = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  std::istringstream in{std::string(s)};
  std::string dow, mon, day, clock, off, year;
  if (!(in >> dow >> mon >> day >> clock >> off >> year)) return std::nullopt;
  std::string extra;
  if (in >> extra) return std::nullopt;
  auto it = std::find(kMonths.begin(), kMonths.end(), mon);
  if (it == kMonths.end()) return std::nullopt;
  const unsigned mo = static_cast<unsigned>(it - kMonths.begin()) + 1;
  auto d = parse_int(day);
  auto y = parse_int(year);
  if (!d || !y || clock.size() != 8 || clock[2] != ':' || clock[5] != ':') return std::nullopt;
  auto h = parse_int(std::string_view(clock).substr(0, 2));
  auto mi = parse_int(std::string_view(clock).substr(3, 2));
  auto sec = parse_int(std::string_view(clock).substr(6, 2));
  if (!h || !mi || !sec || *d < 1 || !valid_date(*y, mo, *d) || !valid_clock(*h, *mi, *sec)) {
    return std::nullopt;
  }
  auto o = parse_offset(off);
  if (!o) return std::nullopt;
  return to_epoch(*y, mo, static_cast<unsigned>(*d), *h, *mi, *sec) - *o;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "read error on " + path);
  return ss.str();
}

// Resolves field names to column positions for one file.
class ColumnResolver {
 public:
  ColumnResolver(const ColumnMapping& format, const std::vector<std::string>& fields,
                 const std::vector<std::string>* header, const std::string& source) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      auto it = format.columns.find(fields[i]);
      if (it == format.columns.end()) {
        positions_.push_back(i);
        continue;
      }
      if (const auto* idx = std::get_if<std::size_t>(&it->second)) {
        positions_.push_back(*idx);
        continue;
      }
      const auto& name = std::get<std::string>(it->second);
      if (header == nullptr) {
        fail(ErrorKind::kConfig, "column '" + name + "' addressed by name but " + source +
                                     " is configured without a header");
      }
      auto pos = std::find(header->begin(), header->end(), name);
      if (pos == header->end()) {
        fail(ErrorKind::kConfig, "column '" + name + "' not found in header of " + source);
      }
      positions_.push_back(static_cast<std::size_t>(pos - header->begin()));
    }
  }
  std::size_t operator[](std::size_t field) const { return positions_[field]; }
  std::size_t max_position() const {
    return *std::max_element(positions_.begin(), positions_.end());
  }

 private:
  std::vector<std::size_t> positions_;
};

template <typename Record, typename RowFn>
Parsed<Record> parse_rows(std::string_view text, const ColumnMapping& format,
                          const std::vector<std::string>& fields, const std::string& source,
                          RowFn&& row_fn) {
  Parsed<Record> out;
  out.report.path = source;
  std::vector<std::string> header;
  std::optional<ColumnResolver> resolver;
  bool header_pending = format.header;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (eol == text.size()) break;
      continue;
    }
    auto cells = split_record(line, format.delimiter);
    if (header_pending) {
      header_pending = false;
      for (auto& c : cells) header.emplace_back(trim(c));
      continue;
    }
    if (!resolver) resolver.emplace(format, fields, format.header ? &header : nullptr, source);
    ++out.report.total_rows;
    std::string reason;
    if (cells.size() <= resolver->max_position()) {
      reason = "missing_columns";
    } else {
      auto rec = row_fn(cells, *resolver, reason);
      if (rec) {
        out.records.push_back(std::move(*rec));
        ++out.report.valid_rows;
        continue;
      }
    }
    ++out.report.skipped_rows;
    ++out.report.skip_reasons[reason];
  }
  if (out.records.empty()) {
    fail(ErrorKind::kIo, "no valid rows in " + source);
  }
  return out;
}

bool valid_lat(double v) { return v >= -90.0 && v <= 90.0; }
bool valid_lon(double v) { return v >= -180.0 && v <= 180.0; }

}  // namespace

const std::vector<std::string>& checkin_fields() {
  static const std::vector<std::string> kFields = {
      "user_id", "poi_id", "category_id", "category_name", "lat", "lon", "timestamp"};
  return kFields;
}

const std::vector<std::string>& taxi_fields() {
  static const std::vector<std::string> kFields = {
      "trip_id",     "pickup_lat",  "pickup_lon",   "dropoff_lat",
      "dropoff_lon", "pickup_time", "dropoff_time"};
  return kFields;
}

std::optional<Timestamp> parse_timestamp(std::string_view text, TimeFormat format) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  switch (format) {
    case TimeFormat::kEpoch:
      return parse_epoch(text);
    case TimeFormat::kIso8601:
      return parse_iso(text);
    case TimeFormat::kFoursquare:
      return parse_foursquare(text);
    case TimeFormat::kAuto:
      break;
  }
  if (auto t = parse_epoch(text)) return t;
  if (auto t = parse_iso(text)) return t;
  return parse_foursquare(text);
}

std::vector<std::string> split_record(std::string_view line, char delimiter) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

Parsed<CheckinEvent> parse_checkins_text(std::string_view text, const ColumnMapping& format,
                                         const std::string& source) {
  auto out = parse_rows<CheckinEvent>(
      text, format, checkin_fields(), source,
      [&](const std::vector<std::string>& cells, const ColumnResolver& col,
          std::string& reason) -> std::optional<CheckinEvent> {
        CheckinEvent ev;
        ev.user_id = std::string(trim(cells[col[0]]));
        ev.poi_id = std::string(trim(cells[col[1]]));
        ev.category_id = std::string(trim(cells[col[2]]));
        ev.category_name = std::string(trim(cells[col[3]]));
        if (ev.user_id.empty() || ev.poi_id.empty() || ev.category_id.empty()) {
          reason = "empty_id";
          return std::nullopt;
        }
        if (ev.category_name.empty()) {
          reason = "empty_category_name";
          return std::nullopt;
        }
        auto lat = parse_double(cells[col[4]]);
        auto lon = parse_double(cells[col[5]]);
        if (!lat || !lon || !valid_lat(*lat) || !valid_lon(*lon)) {
          reason = "bad_coordinate";
          return std::nullopt;
        }
        auto ts = parse_timestamp(cells[col[6]], format.time_format);
        if (!ts) {
          reason = "bad_timestamp";
          return std::nullopt;
        }
        ev.lat = *lat;
        ev.lon = *lon;
        ev.timestamp = *ts;
        return ev;
      });
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const CheckinEvent& a, const CheckinEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

Parsed<TaxiTrip> parse_taxi_text(std::string_view text, const ColumnMapping& format,
                                 const std::string& source) {
  auto out = parse_rows<TaxiTrip>(
      text, format, taxi_fields(), source,
      [&](const std::vector<std::string>& cells, const ColumnResolver& col,
          std::string& reason) -> std::optional<TaxiTrip> {
        TaxiTrip trip;
        trip.trip_id = std::string(trim(cells[col[0]]));
        auto plat = parse_double(cells[col[1]]);
        auto plon = parse_double(cells[col[2]]);
        auto dlat = parse_double(cells[col[3]]);
        auto dlon = parse_double(cells[col[4]]);
        if (!plat || !plon || !dlat || !dlon || !valid_lat(*plat) || !valid_lon(*plon) ||
            !valid_lat(*dlat) || !valid_lon(*dlon)) {
          reason = "bad_coordinate";
          return std::nullopt;
        }
        auto pt = parse_timestamp(cells[col[5]], format.time_format);
        auto dt = parse_timestamp(cells[col[6]], format.time_format);
        if (!pt || !dt) {
          reason = "bad_timestamp";
          return std::nullopt;
        }
        if (*dt < *pt) {
          reason = "dropoff_before_pickup";
          return std::nullopt;
        }
        trip.pickup_lat = *plat;
        trip.pickup_lon = *plon;
        trip.dropoff_lat = *dlat;
        trip.dropoff_lon = *dlon;
        trip.pickup_time = *pt;
        trip.dropoff_time = *dt;
        return trip;
      });
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const TaxiTrip& a, const TaxiTrip& b) {
                     return a.pickup_time < b.pickup_time;
                   });
  return out;
}

Parsed<CheckinEvent> parse_checkins(const std::string& path, const ColumnMapping& format) {
  return parse_checkins_text(read_file(path), format, path);
}

Parsed<TaxiTrip> parse_taxi(const std::string& path, const ColumnMapping& format) {
  return parse_taxi_text(read_file(path), format, path);
}

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) fail(ErrorKind::kConfig, "grid rows and cols must be >= 1");
  if (!(lat_max > lat_min) || !(lon_max > lon_min)) {
    fail(ErrorKind::kConfig, "grid bounding box is degenerate");
  }
}

std::pair<double, double> GridSpec::center(std::size_t cell) const {
  const std::size_t r = cell / cols;
  const std::size_t c = cell % cols;
  const double dlat = (lat_max - lat_min) / static_cast<double>(rows);
  const double dlon = (lon_max - lon_min) / static_cast<double>(cols);
  return {lat_min + (static_cast<double>(r) + 0.5) * dlat,
          lon_min + (static_cast<double>(c) + 0.5) * dlon};
}

namespace {

std::size_t axis_index(double v, double lo, double hi, std::size_t n) {
  if (v >= hi) return n - 1;
  const double f = (v - lo) * static_cast<double>(n) / (hi - lo);
  auto idx = static_cast<std::size_t>(std::floor(f));
  return std::min(idx, n - 1);
}

}  // namespace

std::optional<std::size_t> cell_of(double lat, double lon, const GridSpec& grid) {
  if (!grid.contains(lat, lon)) return std::nullopt;
  const std::size_t r = axis_index(lat, grid.lat_min, grid.lat_max, grid.rows);
  const std::size_t c = axis_index(lon, grid.lon_min, grid.lon_max, grid.cols);
  return r * grid.cols + c;
}

std::size_t nearest_cell(double lat, double lon, const GridSpec& grid) {
  lat = std::clamp(lat, grid.lat_min, grid.lat_max);
  lon = std::clamp(lon, grid.lon_min, grid.lon_max);
  return *cell_of(lat, lon, grid);
}

std::vector<TemporalContext> compute_temporal_contexts(std::span<const TaxiTrip> trips,
                                                       const GridSpec& grid,
                                                       Timestamp window_len) {
  if (window_len <= 0) fail(ErrorKind::kConfig, "window_len must be positive");
  grid.validate();
  std::vector<TemporalContext> out;
  if (trips.empty()) return out;

  auto window_of = [&](Timestamp t) {
    // floor division for negative timestamps as well
    Timestamp q = t / window_len;
    if (t % window_len != 0 && t < 0) --q;
    return q;
  };
  Timestamp first = trips.front().pickup_time;
  Timestamp last = first;
  for (const auto& t : trips) {
    first = std::min(first, t.pickup_time);
    last = std::max(last, t.pickup_time);
  }
  const std::int64_t w0 = window_of(first);
  const std::int64_t w1 = window_of(last);
  const std::size_t m = grid.cells();
  out.reserve(static_cast<std::size_t>(w1 - w0 + 1));
  for (std::int64_t w = w0; w <= w1; ++w) {
    TemporalContext ctx;
    ctx.window_id = w;
    ctx.start = w * window_len;
    ctx.end = ctx.start + window_len;
    ctx.traffic = Mat::Zero(static_cast<Eigen::Index>(m), 3);
    out.push_back(std::move(ctx));
  }
  for (const auto& t : trips) {
    auto& T = out[static_cast<std::size_t>(window_of(t.pickup_time) - w0)].traffic;
    auto from = cell_of(t.pickup_lat, t.pickup_lon, grid);
    auto to = cell_of(t.dropoff_lat, t.dropoff_lon, grid);
    if (from && to && *from == *to) {
      T(static_cast<Eigen::Index>(*from), kInner) += 1.0;
      continue;
    }
    if (from) T(static_cast<Eigen::Index>(*from), kOutflow) += 1.0;
    if (to) T(static_cast<Eigen::Index>(*to), kInflow) += 1.0;
  }
  return out;
}

std::int64_t context_index(Timestamp time, std::span<const TemporalContext> contexts) {
  auto it = std::upper_bound(contexts.begin(), contexts.end(), time,
                             [](Timestamp t, const TemporalContext& c) { return t < c.start; });
  return static_cast<std::int64_t>(it - contexts.begin()) - 1;
}

TemporalContext context_for(Timestamp time, std::span<const TemporalContext> contexts,
                            std::size_t cells) {
  const std::int64_t i = context_index(time, contexts);
  if (i < 0) {
    TemporalContext zero;
    zero.window_id = -1;
    zero.start = time;
    zero.end = time;
    zero.traffic = Mat::Zero(static_cast<Eigen::Index>(cells), 3);
    return zero;
  }
  return contexts[static_cast<std::size_t>(i)];
}

void write_contexts(const std::string& path, std::span<const TemporalContext> contexts,
                    std::size_t cells) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out << "# rigl-contexts v1 cells=" << cells << "\n";
  out << "window_id\tstart\tend\tcell\tinner\tinflow\toutflow\n";
  for (const auto& c : contexts) {
    bool any = false;
    for (Eigen::Index r = 0; r < c.traffic.rows(); ++r) {
      if (c.traffic.row(r).isZero(0.0)) continue;
      any = true;
      out << c.window_id << '\t' << c.start << '\t' << c.end << '\t' << r << '\t'
          << c.traffic(r, 0) << '\t' << c.traffic(r, 1) << '\t' << c.traffic(r, 2) << '\n';
    }
    if (!any) out << c.window_id << '\t' << c.start << '\t' << c.end << "\t-1\t0\t0\t0\n";
  }
  if (!out) fail(ErrorKind::kIo, "write failed: " + path);
}

std::vector<TemporalContext> read_contexts(const std::string& path, std::size_t cells) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open context cache: " + path);
  std::string line;
  std::vector<TemporalContext> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("window_id", 0) == 0) continue;
    std::istringstream row(line);
    std::int64_t wid = 0, cell = 0;
    Timestamp start = 0, end = 0;
    double inner = 0, inflow = 0, outflow = 0;
    if (!(row >> wid >> start >> end >> cell >> inner >> inflow >> outflow)) {
      fail(ErrorKind::kIo, "malformed context cache row in " + path);
    }
    if (out.empty() || out.back().window_id != wid) {
      TemporalContext ctx;
      ctx.window_id = wid;
      ctx.start = start;
      ctx.end = end;
      ctx.traffic = Mat::Zero(static_cast<Eigen::Index>(cells), 3);
      out.push_back(std::move(ctx));
    }
    if (cell >= 0) {
      if (static_cast<std::size_t>(cell) >= cells) {
        fail(ErrorKind::kIo, "context cache cell out of range in " + path);
      }
      out.back().traffic.row(cell) << inner, inflow, outflow;
    }
  }
  return out;
}

void log_parse_report(const ParseReport& report) {
  log_info("parse_report", {{"path", report.path},
                            {"rows", static_cast<std::uint64_t>(report.total_rows)},
                            {"valid", static_cast<std::uint64_t>(report.valid_rows)},
                            {"skipped", static_cast<std::uint64_t>(report.skipped_rows)}});
  for (const auto& [reason, n] : report.skip_reasons) {
    log_info("parse_skip", {{"path", report.path},
                            {"reason", reason},
                            {"count", static_cast<std::uint64_t>(n)}});
  }
}

}  // namespace rigl
