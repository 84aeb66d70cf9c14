/*
 * Copyright 2026 The fedcs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "fedcs/results.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fedcs/error.h"
#include "json.hpp"

namespace fedcs::sim {
namespace {

using nlohmann::json;

double Round6(double v) {
  return std::isfinite(v) ? std::strtod(FormatNumber(v).c_str(), nullptr) : v;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw FormatError("results: bad number '" + s + "' in " + field);
  }
  return v;
}

size_t ParseCount(const std::string& s, const std::string& field) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("results: bad count '" + s + "' in " + field);
  }
}

}  // namespace

ResultFormat ParseFormat(const std::string& name) {
  if (name == "csv") return ResultFormat::kCsv;
  if (name == "jsonl" || name == "json-lines") return ResultFormat::kJsonLines;
  throw InvalidArgument("unknown result format '" + name + "'");
}

const std::vector<std::string>& RecordFields() {
  static const std::vector<std::string> fields = {
      "round",    "scheme",            "r",     "epsilon",      "cost_bits",
      "cost_mbits", "accuracy", "balanced_accuracy", "auroc", "wallclock_ms",
      "solver_iterations"};
  return fields;
}

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string CsvHeader() {
  std::string out;
  for (const std::string& f : RecordFields()) {
    if (!out.empty()) out += ',';
    out += f;
  }
  return out;
}

std::string CsvRow(const RoundRecord& rec) {
  std::string out = std::to_string(rec.round);
  out += ',' + rec.scheme;
  for (double v : {rec.r, rec.epsilon, rec.cost_bits, rec.cost_bits / 1e6,
                   rec.accuracy, rec.balanced_accuracy, rec.auroc,
                   rec.wallclock_ms}) {
    out += ',' + FormatNumber(v);
  }
  out += ',' + std::to_string(rec.solver_iterations);
  return out;
}

std::string JsonLine(const RoundRecord& rec) {
  // ordered_json keeps the field order of the CSV header.
  nlohmann::ordered_json j;
  j["round"] = rec.round;
  j["scheme"] = rec.scheme;
  j["r"] = Round6(rec.r);
  j["epsilon"] = Round6(rec.epsilon);  // non-finite dumps as null
  j["cost_bits"] = Round6(rec.cost_bits);
  j["cost_mbits"] = Round6(rec.cost_bits / 1e6);
  j["accuracy"] = Round6(rec.accuracy);
  j["balanced_accuracy"] = Round6(rec.balanced_accuracy);
  j["auroc"] = Round6(rec.auroc);
  j["wallclock_ms"] = Round6(rec.wallclock_ms);
  j["solver_iterations"] = rec.solver_iterations;
  return j.dump();
}

ResultWriter::ResultWriter(const std::string& path, ResultFormat format)
    : out_(path, std::ios::trunc), format_(format), path_(path) {
  if (!out_) throw IoError("cannot write results to '" + path + "'");
  if (format_ == ResultFormat::kCsv) out_ << CsvHeader() << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed for '" + path + "'");
}

void ResultWriter::Write(const RoundRecord& rec) {
  out_ << (format_ == ResultFormat::kCsv ? CsvRow(rec) : JsonLine(rec))
       << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed for '" + path_ + "'");
}

void EmitResults(const std::vector<RoundRecord>& records,
                 const std::string& path, ResultFormat format) {
  ResultWriter w(path, format);
  for (const RoundRecord& r : records) w.Write(r);
}

std::vector<RoundRecord> ParseCsv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line != CsvHeader()) {
    throw FormatError("results: missing or unexpected CSV header");
  }
  const auto& fields = RecordFields();
  std::vector<RoundRecord> out;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = SplitCsv(line);
    if (c.size() != fields.size()) {
      throw FormatError("results: row has " + std::to_string(c.size()) +
                        " cells, want " + std::to_string(fields.size()));
    }
    RoundRecord r;
    r.round = ParseCount(c[0], fields[0]);
    r.scheme = c[1];
    r.r = ParseDouble(c[2], fields[2]);
    r.epsilon = ParseDouble(c[3], fields[3]);
    r.cost_bits = ParseDouble(c[4], fields[4]);
    r.accuracy = ParseDouble(c[6], fields[6]);
    r.balanced_accuracy = ParseDouble(c[7], fields[7]);
    r.auroc = ParseDouble(c[8], fields[8]);
    r.wallclock_ms = ParseDouble(c[9], fields[9]);
    r.solver_iterations = ParseCount(c[10], fields[10]);
    out.push_back(r);
  }
  return out;
}

RoundRecord ParseJsonLine(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("results: ") + e.what());
  }
  auto num = [&](const char* k) {
    if (!j.contains(k)) throw FormatError(std::string("results: missing ") + k);
    return j[k].is_null() ? std::numeric_limits<double>::infinity()
                          : j[k].get<double>();
  };
  RoundRecord r;
  r.round = j.at("round").get<size_t>();
  r.scheme = j.at("scheme").get<std::string>();
  r.r = num("r");
  r.epsilon = num("epsilon");
  r.cost_bits = num("cost_bits");
  r.accuracy = num("accuracy");
  r.balanced_accuracy = num("balanced_accuracy");
  r.auroc = num("auroc");
  r.wallclock_ms = num("wallclock_ms");
  r.solver_iterations = j.at("solver_iterations").get<size_t>();
  return r;
}

}  // namespace fedcs::sim
