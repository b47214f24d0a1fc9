// Copyright 2026 The pfr Authors.
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

#ifndef PFR_ERROR_HPP_
#define PFR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pfr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad dimensions, out-of-range parameters, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// The requested weighting scheme cannot be evaluated on this dataset.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// 2-means on a set without two distinct values.
class DegenerateClusteringError : public Error {
 public:
  using Error::Error;
};

// Numerical invariants violated beyond round-off.
class InternalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfr

#endif  // PFR_ERROR_HPP_
