#include "scriptboard/error.hpp"

namespace scriptboard {

std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::UnparsableLine: return "UnparsableLine";
    case Errc::DialogueBeforeScene: return "DialogueBeforeScene";
    case Errc::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::UnattributableDialogue: return "UnattributableDialogue";
    case Errc::UnknownSegment: return "UnknownSegment";
    case Errc::UnknownRecord: return "UnknownRecord";
    case Errc::UnrefinedRecord: return "UnrefinedRecord";
    case Errc::BackendError: return "BackendError";
    case Errc::Timeout: return "Timeout";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::NonRetryableStatus: return "NonRetryableStatus";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::DecodeError: return "DecodeError";
    case Errc::DimensionRejected: return "DimensionRejected";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::WrongCount: return "WrongCount";
    case Errc::MissingViewSet: return "MissingViewSet";
    case Errc::AssetMissing: return "AssetMissing";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::DegenerateSamples: return "DegenerateSamples";
    case Errc::CorpusTooSmall: return "CorpusTooSmall";
    case Errc::IoError: return "IoError";
    case Errc::ManifestMismatch: return "ManifestMismatch";
    case Errc::WorkspaceLocked: return "WorkspaceLocked";
    case Errc::InvariantBreach: return "InvariantBreach";
    }
    return "Unknown";
}

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::IoError:
    case Errc::AssetMissing:
        return 3;
    case Errc::BackendError:
    case Errc::Timeout:
    case Errc::AuthMissing:
    case Errc::NonRetryableStatus:
    case Errc::MalformedResponse:
    case Errc::DecodeError:
    case Errc::DimensionRejected:
    case Errc::DimensionMismatch:
    case Errc::WrongCount:
    case Errc::SchemaViolation:
        return 4;
    case Errc::InvariantBreach:
        return 5;
    default:
        return 2;
    }
}

} // namespace scriptboard
