#include "depman/dependency.hpp"

#include "depman/error.hpp"
#include "depman/xml.hpp"

#include <algorithm>

namespace depman {

namespace {

const std::string& required_attr(const DescriptorNode& node, std::string_view key) {
    const std::string* v = node.attribute(key);
    if (!v || v->empty()) {
        throw Error(Errc::MalformedDeps, "<" + node.name + "> lacks '" + std::string(key) + "'");
    }
    return *v;
}

Service service_attr(const DescriptorNode& node, std::string_view key) {
    const std::string& text = required_attr(node, key);
    auto s = parse_service(text);
    if (!s) throw Error(Errc::UnknownService, "'" + text + "'");
    return *s;
}

template <typename T>
void push_unique(std::vector<T>& list, T value, const std::string& what) {
    if (std::find(list.begin(), list.end(), value) != list.end()) {
        throw Error(Errc::DuplicateRequirement, what);
    }
    list.push_back(std::move(value));
}

} // namespace

DependencySpec parse_dependency_spec(std::string_view data) {
    DescriptorNode root;
    try {
        root = parse_xml(data);
    } catch (const Error& e) {
        throw Error(Errc::MalformedDeps, e.detail());
    }
    if (root.name != "dependencies") throw Error(Errc::MalformedDeps, "root must be <dependencies>");
    if (root.text) throw Error(Errc::MalformedDeps, "unexpected text in <dependencies>");

    DependencySpec spec;
    for (const auto& node : root.children) {
        if (node.name == "requires-unit") {
            const std::string& name = required_attr(node, "name");
            push_unique(spec.requires_unit, name, "requires-unit " + name);
        } else if (node.name == "requires-service") {
            Service s = service_attr(node, "name");
            push_unique(spec.requires_service, s, "requires-service " + std::string(to_string(s)));
        } else if (node.name == "requires-resource") {
            ResourceRequirement r{required_attr(node, "name"), service_attr(node, "service")};
            std::string what = "requires-resource " + r.resource + "@" + std::string(to_string(r.service));
            push_unique(spec.requires_resource, std::move(r), what);
        } else if (node.name == "requires-site-link") {
            Service s = service_attr(node, "service");
            if (s != Service::registry) {
                throw Error(Errc::MalformedDeps, "site links are only supported for the registry service");
            }
            SiteLinkRequirement link{s, required_attr(node, "site")};
            std::string what = "requires-site-link registry->" + link.site;
            push_unique(spec.requires_site_link, std::move(link), what);
        } else {
            throw Error(Errc::MalformedDeps, "unknown element <" + node.name + ">");
        }
    }
    return spec;
}

std::string serialize_dependency_spec(const DependencySpec& spec) {
    DescriptorNode root{"dependencies", {}, std::nullopt, {}};
    for (const auto& name : spec.requires_unit) {
        root.children.push_back({"requires-unit", {{"name", name}}, std::nullopt, {}});
    }
    for (auto s : spec.requires_service) {
        root.children.push_back({"requires-service", {{"name", std::string(to_string(s))}}, std::nullopt, {}});
    }
    for (const auto& r : spec.requires_resource) {
        root.children.push_back(
            {"requires-resource", {{"name", r.resource}, {"service", std::string(to_string(r.service))}}, std::nullopt, {}});
    }
    for (const auto& l : spec.requires_site_link) {
        root.children.push_back(
            {"requires-site-link", {{"service", std::string(to_string(l.service))}, {"site", l.site}}, std::nullopt, {}});
    }
    return canonical_bytes(root);
}

std::vector<std::string> dependency_warnings(const DependencySpec& spec) {
    std::vector<std::string> out;
    for (auto s : spec.requires_service) {
        if (is_mandatory(s)) {
            out.push_back("service '" + std::string(to_string(s)) + "' is mandatory on every server; requirement is redundant");
        }
    }
    return out;
}

} // namespace depman
