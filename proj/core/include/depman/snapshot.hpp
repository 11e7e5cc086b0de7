#pragma once

#include "depman/types.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace depman {

struct InstalledModule {
    ModuleKind kind = ModuleKind::web;
    ModuleState state = ModuleState::installed;
    std::size_t digest_count = 0;
    /// Unit names of application children, in contains order.
    std::vector<std::string> children;
    friend bool operator==(const InstalledModule&, const InstalledModule&) = default;
};

/// Point-in-time view of one server as reported by its agent.
struct ServerSnapshot {
    std::string id;
    std::string site;
    /// Mandatory services plus the configured optional ones.
    std::set<Service> services;
    std::map<std::string, Service> resources;
    /// "self" or the id of the server whose registry this server uses.
    std::string registry_endpoint = "self";
    /// Site of the registry in use; equals `site` when registry_endpoint is self.
    std::string registry_site;
    std::map<std::string, InstalledModule> installed;

    /// True when `unit` is installed at top level or as an application child.
    bool has_unit(const std::string& unit) const;

    friend bool operator==(const ServerSnapshot&, const ServerSnapshot&) = default;
};

} // namespace depman
