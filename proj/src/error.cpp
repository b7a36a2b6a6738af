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

#include "terrainseg/error.hpp"

namespace terrainseg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kInvalidLabelValue: return "INVALID_LABEL_VALUE";
    case ErrorCode::kIoFailure: return "IO_FAILURE";
    case ErrorCode::kCorruptFile: return "CORRUPT_FILE";
    case ErrorCode::kMissingMask: return "MISSING_MASK";
    case ErrorCode::kMissingImage: return "MISSING_IMAGE";
    case ErrorCode::kEmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kInsufficientSource: return "INSUFFICIENT_SOURCE";
    case ErrorCode::kZeroSample: return "ZERO_SAMPLE";
    case ErrorCode::kDuplicateSeed: return "DUPLICATE_SEED";
    case ErrorCode::kAllPixelsIgnored: return "ALL_PIXELS_IGNORED";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kEmptyMatrix: return "EMPTY_MATRIX";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kWeightsNotFound: return "WEIGHTS_NOT_FOUND";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kDiverged: return "DIVERGED";
    case ErrorCode::kSplitViolation: return "SPLIT_VIOLATION";
    case ErrorCode::kMissingAxis: return "MISSING_AXIS";
    case ErrorCode::kEmptySelection: return "EMPTY_SELECTION";
  }
  return "UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace terrainseg
