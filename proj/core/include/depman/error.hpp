#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depman {

/// Failure categories raised as exceptions across the library. Guard errors
/// from agents travel as the same codes inside protocol responses and
/// progress messages; to_string() gives the wire spelling.
enum class Errc {
    // unit-model
    NotAnArchive,
    MissingDescriptor,
    MalformedDescriptor,
    KindMismatch,
    MissingChild,
    MalformedPath,
    // config-engine
    InvalidUnit,
    UnknownReference,
    MalformedConfiguration,
    IncompleteConfiguration,
    ForeignConfiguration,
    NotConfigured,
    // depres
    MalformedDeps,
    UnknownService,
    DuplicateRequirement,
    DuplicateUnitName,
    CycleDetected,
    UnsatisfiedDependency,
    // wire / agent
    FrameTooLarge,
    ConnectionClosed,
    EndpointInUse,
    MalformedRequest,
    UnknownOp,
    NotInstalled,
    AlreadyInstalled,
    AlreadyRunning,
    NotRunning,
    StillRunning,
    NotRootModule,
    MissingResource,
    ServiceUnavailable,
    ConflictingService,
    HasDependents,
    AgentUnreachable,
    MalformedServerConfig,
    // manager
    MalformedUri,
    ConnectionRefused,
    Disconnected,
    UnknownTarget,
    MalformedTargets,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(message) {}

    Errc code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace depman
