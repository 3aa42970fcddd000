/*
   Copyright 2026 The stoqpimc Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stoqpimc {

enum class ErrorKind {
    NonStoquastic,
    DecayViolation,
    NormViolation,
    NonPositiveGamma,
    InvalidModel,
    Parse,
    DimensionMismatch,
    DegenerateTemperature,
    BudgetExceeded,
    InitialStateOutsideRestriction,
    NonOverlappingSupport,
    NonErgodic,
    ZeroDenominator,
    InvalidDelta,
    TooLarge,
    LengthMismatch,
    InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NonStoquastic: return "NonStoquastic";
    case ErrorKind::DecayViolation: return "DecayViolation";
    case ErrorKind::NormViolation: return "NormViolation";
    case ErrorKind::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateTemperature: return "DegenerateTemperature";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::InitialStateOutsideRestriction: return "InitialStateOutsideRestriction";
    case ErrorKind::NonOverlappingSupport: return "NonOverlappingSupport";
    case ErrorKind::NonErgodic: return "NonErgodic";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::InvalidDelta: return "InvalidDelta";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace stoqpimc
