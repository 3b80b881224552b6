// Copyright 2026 The fourfield Authors.
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

namespace fourfield {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible extents, out-of-range axes or slices, dimension mismatches
/// between weights and inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in an input or was produced by an operation.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (log of a non-positive
/// value, time outside [0, 1], point inside the unit sphere, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointCorrupt : public IoError {
 public:
  using IoError::IoError;
};

class CheckpointVersionMismatch : public IoError {
 public:
  using IoError::IoError;
};

class CheckpointShapeMismatch : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace fourfield
