// Copyright 2026 The hypermem Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace hypermem {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI for structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define HYPERMEM_DEFINE_ERROR(Name, tag)                  \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& what) : Error(tag, what) {} \
  };

HYPERMEM_DEFINE_ERROR(ShapeError, "shape")
HYPERMEM_DEFINE_ERROR(NumericError, "numeric")
HYPERMEM_DEFINE_ERROR(DomainError, "domain")
HYPERMEM_DEFINE_ERROR(ContractError, "contract")
HYPERMEM_DEFINE_ERROR(DegenerateGeometryError, "degenerate_geometry")
HYPERMEM_DEFINE_ERROR(LookupError, "lookup")
HYPERMEM_DEFINE_ERROR(TrainingError, "training")
HYPERMEM_DEFINE_ERROR(CorruptionError, "corruption")
HYPERMEM_DEFINE_ERROR(ValidationError, "validation")
HYPERMEM_DEFINE_ERROR(ReferenceError, "reference")
HYPERMEM_DEFINE_ERROR(IoError, "io")

#undef HYPERMEM_DEFINE_ERROR

}  // namespace hypermem
