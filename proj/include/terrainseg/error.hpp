/* Copyright 2026 The terrainseg Authors. All Rights Reserved.

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

#ifndef TERRAINSEG_ERROR_HPP_
#define TERRAINSEG_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace terrainseg {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidLabelValue,
  kIoFailure,
  kCorruptFile,
  kMissingMask,
  kMissingImage,
  kEmptyDataset,
  kParseError,
  kInsufficientSource,
  kZeroSample,
  kDuplicateSeed,
  kAllPixelsIgnored,
  kShapeMismatch,
  kEmptyMatrix,
  kDimensionMismatch,
  kWeightsNotFound,
  kConfigError,
  kDiverged,
  kSplitViolation,
  kMissingAxis,
  kEmptySelection,
};

// Upper-snake name used in messages, e.g. "INSUFFICIENT_SOURCE".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace terrainseg

#endif  // TERRAINSEG_ERROR_HPP_
