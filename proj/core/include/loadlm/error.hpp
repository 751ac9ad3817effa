// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadlm {

enum class ErrorCode {
  kInvalidArgument,
  kSeriesTooShort,
  kNonFinite,
  kOutOfRange,
  kIndexOutOfRange,
  kLengthMismatch,
  kParseError,
  kGapError,
  kDuplicateTimestamp,
  kSpanTooShort,
  kIoError,
  kSchemaError,
  kBadKernel,
  kEmptyTrainingSet,
  kInputTooShort,
  kShapeMismatch,
  kContextOverflow,
  kPromptTooLong,
  kBackendUnavailable,
  kTimeout,
  kRateLimited,
  kMalformedResponse,
};

// Stable name used in machine-readable error output, e.g. "SeriesTooShort".
std::string_view ErrorName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace loadlm
