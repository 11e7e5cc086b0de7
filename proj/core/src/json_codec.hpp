#pragma once

// JSON mappings shared by the agent and the manager side of the protocol.

#include "depman/error.hpp"
#include "depman/snapshot.hpp"

#include <json.hpp>

namespace depman::detail {

using nlohmann::json;

inline json services_to_json(const std::set<Service>& services) {
    json out = json::array();
    for (auto s : services) out.push_back(std::string(to_string(s)));
    return out;
}

inline json snapshot_to_json(const ServerSnapshot& snap) {
    json resources = json::object();
    for (const auto& [name, service] : snap.resources) resources[name] = std::string(to_string(service));
    json installed = json::object();
    for (const auto& [name, m] : snap.installed) {
        installed[name] = {{"kind", std::string(to_string(m.kind))},
                           {"state", std::string(to_string(m.state))},
                           {"digests", m.digest_count},
                           {"children", m.children}};
    }
    return {{"id", snap.id},
            {"site", snap.site},
            {"services", services_to_json(snap.services)},
            {"registry_endpoint", snap.registry_endpoint},
            {"registry_site", snap.registry_site},
            {"resources", resources},
            {"installed", installed}};
}

inline Service service_from_json(const json& j) {
    auto s = parse_service(j.get<std::string>());
    if (!s) throw Error(Errc::UnknownService, j.get<std::string>());
    return *s;
}

inline ServerSnapshot snapshot_from_json(const json& j) {
    ServerSnapshot snap;
    snap.id = j.at("id").get<std::string>();
    snap.site = j.at("site").get<std::string>();
    for (const auto& s : j.at("services")) snap.services.insert(service_from_json(s));
    snap.registry_endpoint = j.at("registry_endpoint").get<std::string>();
    snap.registry_site = j.at("registry_site").get<std::string>();
    for (const auto& [name, service] : j.at("resources").items()) snap.resources[name] = service_from_json(service);
    for (const auto& [name, m] : j.at("installed").items()) {
        InstalledModule mod;
        auto kind = parse_module_kind(m.at("kind").get<std::string>());
        auto state = parse_module_state(m.at("state").get<std::string>());
        if (!kind || !state) throw Error(Errc::MalformedRequest, "bad module record for " + name);
        mod.kind = *kind;
        mod.state = *state;
        mod.digest_count = m.at("digests").get<std::size_t>();
        mod.children = m.at("children").get<std::vector<std::string>>();
        snap.installed[name] = std::move(mod);
    }
    return snap;
}

inline json error_reply(const json& id, std::string_view code, const std::string& message) {
    return {{"id", id}, {"ok", false}, {"code", std::string(code)}, {"message", message}};
}

} // namespace depman::detail
