#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace devfp {

enum class ErrorCode {
    // capture
    UnknownMagic,
    UnsupportedFormat,
    UnsupportedLinkType,
    TruncatedHeader,
    CorruptFrame,
    // features / datasets
    EmptyRegistry,
    InvalidRegistry,
    HeaderMismatch,
    RaggedRow,
    NonNumericCell,
    InvalidLabel,
    // selection
    AllZeroCounts,
    SingleClassDataset,
    MissingMeta,
    InvalidMeta,
    // classifiers
    EmptyDataset,
    InvalidHyperparams,
    SchemaMismatch,
    UnlabeledRow,
    ModelFormat,
    ModelVersion,
    // evaluation
    ClassTooSmall,
    EmptyMatrix,
    UnknownClass,
    // io
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace devfp
