#include "depman/config.hpp"

#include "depman/error.hpp"

#include <algorithm>
#include <set>

namespace depman {

namespace {

std::string quoted_path(std::string_view element, std::string_view name) {
    return "/unit/" + std::string(element) + "[@name='" + std::string(name) + "']";
}

ConfigNode root_for(const DeployableUnit& unit) {
    ConfigNode root;
    root.deployable = unit.name;
    root.xpath = "/unit";
    for (const auto& node : unit.descriptor.children) {
        if (node.name != "component" && node.name != "reference") continue;
        const std::string& name = node.attribute_or("name", "");
        ConfigNode child;
        child.deployable = unit.name;
        child.xpath = quoted_path(node.name, name);
        if (node.name == "component") {
            child.component_name = name;
        } else {
            child.reference_name = name;
        }
        root.children.push_back(std::move(child));
    }
    return root;
}

bool same_shape(const ConfigNode& a, const ConfigNode& b) {
    if (a.deployable != b.deployable || a.xpath != b.xpath || a.component_name != b.component_name ||
        a.reference_name != b.reference_name || a.children.size() != b.children.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!same_shape(a.children[i], b.children[i])) return false;
    }
    return true;
}

template <typename F>
void for_each_node(const std::vector<ConfigNode>& nodes, F&& f) {
    for (const auto& n : nodes) {
        f(n);
        for_each_node(n.children, f);
    }
}

template <typename F>
void for_each_node(std::vector<ConfigNode>& nodes, F&& f) {
    for (auto& n : nodes) {
        f(n);
        for_each_node(n.children, f);
    }
}

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedConfiguration, what); }

const std::string& need_attr(const DescriptorNode& node, std::string_view key) {
    const std::string* v = node.attribute(key);
    if (!v || v->empty()) malformed("<" + node.name + "> lacks '" + std::string(key) + "'");
    return *v;
}

void expect_attrs(const DescriptorNode& node, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : node.attributes) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            malformed("unexpected attribute '" + key + "' on <" + node.name + ">");
        }
    }
    if (!node.children.empty() || node.text) malformed("<" + node.name + "> must be empty");
}

const DeployableUnit* find_deployable(const DeployableUnit& unit, std::string_view name) {
    if (unit.name == name) return &unit;
    for (const auto& child : unit.children) {
        if (child.name == name) return &child;
    }
    return nullptr;
}

} // namespace

bool DeploymentConfiguration::complete() const {
    bool ok = true;
    for_each_node(roots, [&](const ConfigNode& n) {
        if (n.reference_name && !n.binding) ok = false;
    });
    return ok;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = kFnvOffsetBasis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string to_hex16(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string InterpositionManifest::serialize() const {
    std::string out;
    for (const auto& e : entries) out += "stub:" + e.component + ":" + e.digest + "\n";
    return out;
}

InterpositionManifest InterpositionManifest::parse(std::string_view text) {
    InterpositionManifest m;
    while (!text.empty()) {
        auto nl = text.find('\n');
        if (nl == std::string_view::npos) throw Error(Errc::NotConfigured, "stub manifest line not terminated");
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl + 1);
        auto last = line.rfind(':');
        if (!line.starts_with("stub:") || last == std::string_view::npos || last < 5 || line.size() - last - 1 != 16) {
            throw Error(Errc::NotConfigured, "bad stub manifest line '" + std::string(line) + "'");
        }
        std::string digest(line.substr(last + 1));
        if (!std::all_of(digest.begin(), digest.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); })) {
            throw Error(Errc::NotConfigured, "bad digest '" + digest + "'");
        }
        m.entries.push_back({std::string(line.substr(5, last - 5)), std::move(digest)});
    }
    return m;
}

DeploymentConfiguration create_configuration(const DeployableUnit& unit) {
    auto violations = validate_unit(unit);
    if (!violations.empty()) {
        std::string msg;
        for (const auto& v : violations) {
            if (!msg.empty()) msg += "; ";
            msg += std::string(to_string(v.code)) + " at " + v.where;
        }
        throw Error(Errc::InvalidUnit, msg);
    }
    DeploymentConfiguration config;
    config.unit_name = unit.name;
    config.roots.push_back(root_for(unit));
    for (const auto& child : unit.children) config.roots.push_back(root_for(child));
    return config;
}

DeploymentConfiguration bind(DeploymentConfiguration config, std::string_view reference, std::string_view resource) {
    bool found = false;
    for_each_node(config.roots, [&](ConfigNode& n) {
        if (n.reference_name && *n.reference_name == reference) {
            n.binding = std::string(resource);
            found = true;
        }
    });
    if (!found) throw Error(Errc::UnknownReference, "'" + std::string(reference) + "'");
    return config;
}

std::vector<std::string> unbound_references(const DeploymentConfiguration& config) {
    std::set<std::string> names;
    for_each_node(config.roots, [&](const ConfigNode& n) {
        if (n.reference_name && !n.binding) names.insert(*n.reference_name);
    });
    return {names.begin(), names.end()};
}

std::string save_configuration(const DeploymentConfiguration& config) {
    DescriptorNode doc{"platform-config", {{"for", config.unit_name}}, std::nullopt, {}};
    for (std::size_t i = 0; i < config.roots.size(); ++i) {
        const ConfigNode& root = config.roots[i];
        if (i > 0) doc.children.push_back({"deployable", {{"name", root.deployable}}, std::nullopt, {}});
        for (const auto& n : root.children) {
            if (n.component_name) {
                doc.children.push_back({"component", {{"deployable", root.deployable}, {"name", *n.component_name}}, std::nullopt, {}});
            } else if (n.reference_name) {
                DescriptorNode b{"binding", {{"deployable", root.deployable}, {"reference", *n.reference_name}}, std::nullopt, {}};
                if (n.binding) b.attributes["resource"] = *n.binding;
                doc.children.push_back(std::move(b));
            }
        }
    }
    return canonical_bytes(doc);
}

DeploymentConfiguration restore_configuration(std::string_view data) {
    DescriptorNode doc;
    try {
        doc = parse_xml(data);
    } catch (const Error& e) {
        malformed(e.detail());
    }
    if (doc.name != "platform-config") malformed("root must be <platform-config>");
    expect_attrs(DescriptorNode{doc.name, doc.attributes, std::nullopt, {}}, {"for"});
    if (doc.text) malformed("unexpected text");

    DeploymentConfiguration config;
    config.unit_name = need_attr(doc, "for");
    ConfigNode first;
    first.deployable = config.unit_name;
    first.xpath = "/unit";
    config.roots.push_back(std::move(first));

    std::set<std::string> deployables{config.unit_name};
    for (const auto& node : doc.children) {
        ConfigNode& current = config.roots.back();
        if (node.name == "deployable") {
            expect_attrs(node, {"name"});
            const std::string& name = need_attr(node, "name");
            if (!deployables.insert(name).second) malformed("duplicate deployable '" + name + "'");
            ConfigNode root;
            root.deployable = name;
            root.xpath = "/unit";
            config.roots.push_back(std::move(root));
            continue;
        }
        if (node.name != "component" && node.name != "binding") malformed("unknown element <" + node.name + ">");
        const std::string& owner = need_attr(node, "deployable");
        if (owner != current.deployable) malformed("<" + node.name + "> for '" + owner + "' outside its deployable");

        ConfigNode n;
        n.deployable = owner;
        if (node.name == "component") {
            expect_attrs(node, {"deployable", "name"});
            n.component_name = need_attr(node, "name");
            n.xpath = quoted_path("component", *n.component_name);
        } else {
            expect_attrs(node, {"deployable", "reference", "resource"});
            n.reference_name = need_attr(node, "reference");
            if (n.reference_name->find('\'') != std::string::npos) malformed("quote in reference name");
            n.xpath = quoted_path("reference", *n.reference_name);
            if (node.attribute("resource")) n.binding = need_attr(node, "resource");
        }
        current.children.push_back(std::move(n));
    }
    return config;
}

std::string stub_digest_input(const DescriptorNode& component,
                              const std::vector<std::pair<std::string, std::string>>& bindings) {
    std::vector<std::string> lines;
    lines.reserve(bindings.size());
    for (const auto& [ref, res] : bindings) lines.push_back(ref + "=" + res + "\n");
    std::sort(lines.begin(), lines.end());
    std::string input = canonical_bytes(component);
    input.push_back('\0');
    for (const auto& l : lines) input += l;
    return input;
}

DeployedUnit generate_deployed_unit(const DeployableUnit& unit, const DeploymentConfiguration& config) {
    if (config.unit_name != unit.name) {
        throw Error(Errc::ForeignConfiguration, "configuration for '" + config.unit_name + "' applied to '" + unit.name + "'");
    }
    DeploymentConfiguration expected = create_configuration(unit);
    bool shape_ok = expected.roots.size() == config.roots.size();
    for (std::size_t i = 0; shape_ok && i < config.roots.size(); ++i) {
        shape_ok = same_shape(expected.roots[i], config.roots[i]);
    }
    if (!shape_ok) throw Error(Errc::ForeignConfiguration, "configuration does not match the structure of '" + unit.name + "'");

    if (auto missing = unbound_references(config); !missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw Error(Errc::IncompleteConfiguration, "unbound references: " + names);
    }

    DeployedUnit out;
    out.base = unit;
    out.config = config;
    for (const auto& root : config.roots) {
        const DeployableUnit* owner = find_deployable(unit, root.deployable);
        std::vector<std::pair<std::string, std::string>> bindings;
        for (const auto& n : root.children) {
            if (n.reference_name) bindings.emplace_back(*n.reference_name, *n.binding);
        }
        for (const auto& n : root.children) {
            if (!n.component_name) continue;
            auto hits = query(owner->descriptor, n.xpath);
            std::uint64_t digest = fnv1a64(stub_digest_input(*hits.at(0), bindings));
            out.manifest.entries.push_back({*n.component_name, to_hex16(digest)});
        }
    }
    std::sort(out.manifest.entries.begin(), out.manifest.entries.end(),
              [](const auto& a, const auto& b) { return a.component < b.component; });
    return out;
}

zip::Entries deployed_entries(const DeployedUnit& unit) {
    zip::Entries entries = unit.base.entries;
    entries[std::string(kPlatformEntry)] = save_configuration(unit.config);
    entries[std::string(kManifestEntry)] = unit.manifest.serialize();
    return entries;
}

std::string write_unit(const DeployedUnit& unit) { return zip::write(deployed_entries(unit)); }

DeployedUnit open_deployed_unit(std::string_view archive) {
    if (!zip::looks_like_zip(archive)) throw Error(Errc::NotAnArchive, "missing ZIP signature");
    zip::Entries entries = zip::read(archive);
    auto platform = entries.find(std::string(kPlatformEntry));
    auto manifest = entries.find(std::string(kManifestEntry));
    if (platform == entries.end() || manifest == entries.end()) {
        throw Error(Errc::NotConfigured, "archive lacks " + std::string(kPlatformEntry) + " or " + std::string(kManifestEntry));
    }
    DeploymentConfiguration config = restore_configuration(platform->second);
    InterpositionManifest stored = InterpositionManifest::parse(manifest->second);
    entries.erase(platform);
    entries.erase(std::string(kManifestEntry));

    DeployedUnit deployed = generate_deployed_unit(open_unit_entries(std::move(entries)), config);
    if (deployed.manifest != stored) throw Error(Errc::NotConfigured, "stub manifest does not match the embedded configuration");
    return deployed;
}

} // namespace depman
