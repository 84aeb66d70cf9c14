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

#ifndef FEDCS_ERROR_H_
#define FEDCS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedcs {

enum class ErrorCode {
  kInvalidArgument,
  kNumericFailure,
  kRange,
  kProtocol,
  kFormat,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Base exception for every failure raised by the library. The CLI prints
// "<category>: <message>" and maps the category to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& m)
      : Error(ErrorCode::kInvalidArgument, m) {}
};

class NumericFailure : public Error {
 public:
  explicit NumericFailure(const std::string& m)
      : Error(ErrorCode::kNumericFailure, m) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& m) : Error(ErrorCode::kRange, m) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m)
      : Error(ErrorCode::kProtocol, m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorCode::kFormat, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCode::kIo, m) {}
};

}  // namespace fedcs

#endif  // FEDCS_ERROR_H_
