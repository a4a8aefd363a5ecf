#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdisc {

enum class Errc {
    EmptyImage,
    DimensionMismatch,
    ZeroVector,
    MissingAppearance,
    MissingPair,
    ParseError,
    ScoreOutOfRange,
    MatcherFailure,
    OrderMismatch,
    InvalidMatrix,
    MissingDescriptor,
    NoPositiveSamples,
    LabelUniverseMismatch,
    EmptyTable,
    FewerThanTwoItems,
    InfeasibleGeometry,
    InvalidConfig,
    InvalidDataset,
    IoFailure,
};

inline std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::EmptyImage: return "EmptyImage";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::MissingAppearance: return "MissingAppearance";
    case Errc::MissingPair: return "MissingPair";
    case Errc::ParseError: return "ParseError";
    case Errc::ScoreOutOfRange: return "ScoreOutOfRange";
    case Errc::MatcherFailure: return "MatcherFailure";
    case Errc::OrderMismatch: return "OrderMismatch";
    case Errc::InvalidMatrix: return "InvalidMatrix";
    case Errc::MissingDescriptor: return "MissingDescriptor";
    case Errc::NoPositiveSamples: return "NoPositiveSamples";
    case Errc::LabelUniverseMismatch: return "LabelUniverseMismatch";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::FewerThanTwoItems: return "FewerThanTwoItems";
    case Errc::InfeasibleGeometry: return "InfeasibleGeometry";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidDataset: return "InvalidDataset";
    case Errc::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the failure kind;
/// the message carries the offending identifier, line or record position.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    Errc code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace fdisc
