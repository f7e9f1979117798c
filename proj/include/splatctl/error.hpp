// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splatctl {

enum class ErrorCode {
    MissingFile,
    MalformedContainer,
    BadMagic,
    HeaderMismatch,
    CoefficientLengthMismatch,
    InvalidDimension,
    ResolutionMismatch,
    ShapeMismatch,
    ChannelOutOfRange,
    InvalidRange,
    InvalidArgument,
    IoFailure,
};

std::string_view to_string(ErrorCode code);

/// Typed failure raised by every public operation in the library.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace splatctl
