#include "depman/types.hpp"

namespace depman {

std::string_view to_string(ModuleKind kind) noexcept {
    switch (kind) {
    case ModuleKind::application: return "application";
    case ModuleKind::web: return "web";
    case ModuleKind::component: return "component";
    case ModuleKind::adapter: return "adapter";
    }
    return "?";
}

std::optional<ModuleKind> parse_module_kind(std::string_view text) noexcept {
    for (auto k : {ModuleKind::application, ModuleKind::web, ModuleKind::component, ModuleKind::adapter}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::string_view to_string(Service service) noexcept {
    switch (service) {
    case Service::mail: return "mail";
    case Service::ejb_container: return "ejb-container";
    case Service::web_container: return "web-container";
    case Service::ws: return "ws";
    case Service::transaction: return "transaction";
    case Service::registry: return "registry";
    case Service::security: return "security";
    case Service::ear: return "ear";
    }
    return "?";
}

std::optional<Service> parse_service(std::string_view text) noexcept {
    for (auto s : kAllServices) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

std::string_view to_string(ModuleState state) noexcept {
    return state == ModuleState::running ? "running" : "installed";
}

std::optional<ModuleState> parse_module_state(std::string_view text) noexcept {
    if (text == "installed") return ModuleState::installed;
    if (text == "running") return ModuleState::running;
    return std::nullopt;
}

} // namespace depman
