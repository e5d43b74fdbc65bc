// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CELLFED_ERRORS_HPP
#define CELLFED_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cellfed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// emq_codec
class ExponentOutOfRange : public Error {
 public:
  using Error::Error;
};

class TruncatedStream : public Error {
 public:
  using Error::Error;
};

class MalformedCode : public Error {
 public:
  using Error::Error;
};

// power_solver
class QpInfeasible : public Error {
 public:
  using Error::Error;
};

// federation
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// experiment configuration; carries the offending field and line (0 if n/a)
class ConfigInvalid : public Error {
 public:
  ConfigInvalid(std::string field, int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + field + ": " + what
                       : field + ": " + what),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellfed

#endif  // CELLFED_ERRORS_HPP
