#include "quim/error.hpp"

namespace quim {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedUrl: return "MalformedUrl";
        case Errc::EmptyDocument: return "EmptyDocument";
        case Errc::IoError: return "IoError";
        case Errc::FormatError: return "FormatError";
        case Errc::ConfigError: return "ConfigError";
        case Errc::ProviderError: return "ProviderError";
        case Errc::EmptyGeneration: return "EmptyGeneration";
        case Errc::TemplateError: return "TemplateError";
        case Errc::EmptyText: return "EmptyText";
        case Errc::DimMismatch: return "DimMismatch";
        case Errc::InvalidVector: return "InvalidVector";
        case Errc::TooFewVectors: return "TooFewVectors";
        case Errc::ReferentialIntegrity: return "ReferentialIntegrity";
        case Errc::UnknownPrototype: return "UnknownPrototype";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::ChecksumError: return "ChecksumError";
        case Errc::EmbedderMismatch: return "EmbedderMismatch";
        case Errc::EmptyIndex: return "EmptyIndex";
        case Errc::ContextOverflow: return "ContextOverflow";
        case Errc::EmptySequence: return "EmptySequence";
        case Errc::NoClaims: return "NoClaims";
        case Errc::EmptyContext: return "EmptyContext";
        case Errc::JudgeHallucination: return "JudgeHallucination";
        case Errc::EmptyRetrieval: return "EmptyRetrieval";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace quim
