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

#include "rigl/common.hpp"

#include <atomic>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace rigl {
namespace {

std::atomic<bool> g_quiet{false};

bool needs_quoting(const std::string& v) {
  if (v.empty()) return true;
  for (char c : v) {
    if (c == ' ' || c == '"' || c == '=' || c == '\t') return true;
  }
  return false;
}

void emit(const char* level, std::string_view event,
          std::initializer_list<LogField> fields) {
  std::ostringstream out;
  out << "level=" << level << " event=" << event;
  for (const auto& f : fields) {
    out << ' ' << f.key << '=';
    if (needs_quoting(f.value)) {
      out << '"';
      for (char c : f.value) {
        if (c == '"') out << '\\';
        out << c;
      }
      out << '"';
    } else {
      out << f.value;
    }
  }
  out << '\n';
  std::cerr << out.str();
}

}  // namespace

LogField::LogField(std::string k, double v) : key(std::move(k)) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  value = buf;
}

LogField::LogField(std::string k, std::int64_t v)
    : key(std::move(k)), value(std::to_string(v)) {}

LogField::LogField(std::string k, std::uint64_t v)
    : key(std::move(k)), value(std::to_string(v)) {}

void log_info(std::string_view event, std::initializer_list<LogField> fields) {
  if (!g_quiet.load()) emit("info", event, fields);
}

void log_warn(std::string_view event, std::initializer_list<LogField> fields) {
  emit("warn", event, fields);
}

void set_log_quiet(bool quiet) { g_quiet.store(quiet); }
bool log_quiet() { return g_quiet.load(); }

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace rigl
