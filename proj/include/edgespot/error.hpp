/* Copyright 2026 The EdgeSpot Authors. All Rights Reserved.

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
#ifndef EDGESPOT_ERROR_HPP_
#define EDGESPOT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace edgespot {

// Base class for every error raised by the library. The CLI maps these to
// exit code 2 (data/validation error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid configuration (e.g. sub-band count not dividing F).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A scalar parameter lies outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: bad WAV, corrupt bundle, unparsable text.
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgespot

#endif  // EDGESPOT_ERROR_HPP_
