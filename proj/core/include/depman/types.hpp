#pragma once

#include <optional>
#include <string_view>

namespace depman {

/// The four deployable-unit kinds: application (EAR), web (WAR),
/// component (EJB-JAR) and adapter (RAR). Only applications have children.
enum class ModuleKind { application, web, component, adapter };

std::string_view to_string(ModuleKind kind) noexcept;
std::optional<ModuleKind> parse_module_kind(std::string_view text) noexcept;

/// Server services. The first four are optional and must be configured;
/// the last four run on every server.
enum class Service { mail, ejb_container, web_container, ws, transaction, registry, security, ear };

inline constexpr Service kAllServices[] = {Service::mail,        Service::ejb_container, Service::web_container,
                                           Service::ws,          Service::transaction,   Service::registry,
                                           Service::security,    Service::ear};

inline constexpr Service kMandatoryServices[] = {Service::transaction, Service::registry, Service::security,
                                                 Service::ear};

constexpr bool is_mandatory(Service s) noexcept {
    return s == Service::transaction || s == Service::registry || s == Service::security || s == Service::ear;
}

std::string_view to_string(Service service) noexcept;
std::optional<Service> parse_service(std::string_view text) noexcept;

/// Lifecycle state of a module present on a server. Absence is modelled by
/// the module not being in the server's table.
enum class ModuleState { installed, running };

std::string_view to_string(ModuleState state) noexcept;
std::optional<ModuleState> parse_module_state(std::string_view text) noexcept;

} // namespace depman
