#include "depman/error.hpp"

namespace depman {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::NotAnArchive: return "NotAnArchive";
    case Errc::MissingDescriptor: return "MissingDescriptor";
    case Errc::MalformedDescriptor: return "MalformedDescriptor";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::MissingChild: return "MissingChild";
    case Errc::MalformedPath: return "MalformedPath";
    case Errc::InvalidUnit: return "InvalidUnit";
    case Errc::UnknownReference: return "UnknownReference";
    case Errc::MalformedConfiguration: return "MalformedConfiguration";
    case Errc::IncompleteConfiguration: return "IncompleteConfiguration";
    case Errc::ForeignConfiguration: return "ForeignConfiguration";
    case Errc::NotConfigured: return "NotConfigured";
    case Errc::MalformedDeps: return "MalformedDeps";
    case Errc::UnknownService: return "UnknownService";
    case Errc::DuplicateRequirement: return "DuplicateRequirement";
    case Errc::DuplicateUnitName: return "DuplicateUnitName";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::UnsatisfiedDependency: return "UnsatisfiedDependency";
    case Errc::FrameTooLarge: return "FrameTooLarge";
    case Errc::ConnectionClosed: return "ConnectionClosed";
    case Errc::EndpointInUse: return "EndpointInUse";
    case Errc::MalformedRequest: return "MalformedRequest";
    case Errc::UnknownOp: return "UnknownOp";
    case Errc::NotInstalled: return "NotInstalled";
    case Errc::AlreadyInstalled: return "AlreadyInstalled";
    case Errc::AlreadyRunning: return "AlreadyRunning";
    case Errc::NotRunning: return "NotRunning";
    case Errc::StillRunning: return "StillRunning";
    case Errc::NotRootModule: return "NotRootModule";
    case Errc::MissingResource: return "MissingResource";
    case Errc::ServiceUnavailable: return "ServiceUnavailable";
    case Errc::ConflictingService: return "ConflictingService";
    case Errc::HasDependents: return "HasDependents";
    case Errc::AgentUnreachable: return "AgentUnreachable";
    case Errc::MalformedServerConfig: return "MalformedServerConfig";
    case Errc::MalformedUri: return "MalformedUri";
    case Errc::ConnectionRefused: return "ConnectionRefused";
    case Errc::Disconnected: return "Disconnected";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::MalformedTargets: return "MalformedTargets";
    }
    return "Unknown";
}

} // namespace depman
