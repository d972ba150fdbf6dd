/* Copyright 2026 The Reachgrid Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef REACHGRID_ERRORS_H_
#define REACHGRID_ERRORS_H_

#include <stdexcept>
#include <string>

namespace reachgrid {

// A caller-supplied parameter is out of range. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Two artifacts disagree on a shape or configuration field (r, d_R, ...).
// Maps to CLI exit code 3.
class IncompatibleArtifact : public std::runtime_error {
 public:
  IncompatibleArtifact(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Outputs differ across worker counts or reruns.
class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reachgrid

#endif  // REACHGRID_ERRORS_H_
