/*
 * Copyright 2026 The TOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace tod {

using TokenId = std::int32_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
  kConfig,
  kDomain,
  kSchema,
  kAnnotation,
  kTraining,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

// All library failures surface as tod::Error; the kind maps onto the C API
// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Child seed for a named stage. Stages never share a stream, so inserting a
// new stage leaves every other stage's draws untouched.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

}  // namespace tod
