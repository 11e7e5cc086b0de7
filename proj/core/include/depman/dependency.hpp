#pragma once

#include "depman/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace depman {

struct ResourceRequirement {
    std::string resource;
    Service service;
    friend bool operator==(const ResourceRequirement&, const ResourceRequirement&) = default;
};

/// Cross-site link: this unit's server must use the `service` (currently
/// only the registry) of the server running on `site`.
struct SiteLinkRequirement {
    Service service = Service::registry;
    std::string site;
    friend bool operator==(const SiteLinkRequirement&, const SiteLinkRequirement&) = default;
};

/// What a unit needs from its environment besides its own archive. Lists
/// keep declaration order and are duplicate-free.
struct DependencySpec {
    std::vector<std::string> requires_unit;
    std::vector<Service> requires_service;
    std::vector<ResourceRequirement> requires_resource;
    std::vector<SiteLinkRequirement> requires_site_link;

    bool empty() const noexcept {
        return requires_unit.empty() && requires_service.empty() && requires_resource.empty() &&
               requires_site_link.empty();
    }
    friend bool operator==(const DependencySpec&, const DependencySpec&) = default;
};

/// Parses `META-INF/deps.xml`. Throws Error{MalformedDeps, UnknownService,
/// DuplicateRequirement}.
DependencySpec parse_dependency_spec(std::string_view data);

/// Canonical `<dependencies>` document for `spec`.
std::string serialize_dependency_spec(const DependencySpec& spec);

/// Non-fatal findings, e.g. a mandatory service listed in requires-service.
std::vector<std::string> dependency_warnings(const DependencySpec& spec);

} // namespace depman
