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


#ifndef FEDCS_RESULTS_H_
#define FEDCS_RESULTS_H_

#include <fstream>
#include <string>
#include <vector>

#include "fedcs/experiment.h"

namespace fedcs::sim {

enum class ResultFormat { kCsv, kJsonLines };

ResultFormat ParseFormat(const std::string& name);

// Field order of every CSV row and JSON object.
const std::vector<std::string>& RecordFields();

std::string FormatNumber(double v);  // 6 significant digits
std::string CsvHeader();
std::string CsvRow(const RoundRecord& rec);
std::string JsonLine(const RoundRecord& rec);

// Appends records as they arrive and flushes after each one.
class ResultWriter {
 public:
  ResultWriter(const std::string& path, ResultFormat format);

  void Write(const RoundRecord& rec);

 private:
  std::ofstream out_;
  ResultFormat format_;
  std::string path_;
};

void EmitResults(const std::vector<RoundRecord>& records,
                 const std::string& path, ResultFormat format);

std::vector<RoundRecord> ParseCsv(const std::string& text);
RoundRecord ParseJsonLine(const std::string& line);

}  // namespace fedcs::sim

#endif  // FEDCS_RESULTS_H_
