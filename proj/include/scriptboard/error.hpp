#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scriptboard {

enum class Errc {
    // script_ir
    UnparsableLine,
    DialogueBeforeScene,
    EmptyAfterNormalization,
    InvalidInput,
    // director
    SchemaViolation,
    UnattributableDialogue,
    UnknownSegment,
    UnknownRecord,
    UnrefinedRecord,
    // backends
    BackendError,
    Timeout,
    AuthMissing,
    NonRetryableStatus,
    MalformedResponse,
    DecodeError,
    DimensionRejected,
    DimensionMismatch,
    WrongCount,
    // storyboard
    MissingViewSet,
    AssetMissing,
    // quality
    ImageTooSmall,
    DegenerateSamples,
    CorpusTooSmall,
    // workspace
    IoError,
    ManifestMismatch,
    WorkspaceLocked,
    InvariantBreach,
};

std::string_view errc_name(Errc code);

/// Process exit code for an error: 2 user/input, 3 I/O, 4 backend, 5 invariant.
int exit_code_for(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace scriptboard
