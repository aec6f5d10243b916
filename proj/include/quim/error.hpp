#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quim {

/// Failure classes raised across the pipeline. The service layer reports
/// the class name (see to_string) to clients.
enum class Errc {
    MalformedUrl,
    EmptyDocument,
    IoError,
    FormatError,
    ConfigError,
    ProviderError,
    EmptyGeneration,
    TemplateError,
    EmptyText,
    DimMismatch,
    InvalidVector,
    TooFewVectors,
    ReferentialIntegrity,
    UnknownPrototype,
    VersionMismatch,
    ChecksumError,
    EmbedderMismatch,
    EmptyIndex,
    ContextOverflow,
    EmptySequence,
    NoClaims,
    EmptyContext,
    JudgeHallucination,
    EmptyRetrieval,
    InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace quim
