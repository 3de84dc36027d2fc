// Copyright (c) 2026 The fvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fvc {

// Every failure the library raises derives from Error. The CLI maps the
// three families onto exit codes: IoError -> 1, ValidationError -> 2,
// NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed WAV header or payload.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& field, const std::string& what)
      : ValidationError("wav format error [" + field + "]: " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Raised by remove_silence when no frame passes the energy threshold.
class EmptyVoicedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Single-class or otherwise unusable score sets.
class DegenerateDataError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : NumericError(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const IoError*>(&e)) return 1;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;
}

}  // namespace fvc
