#include "depman/unit.hpp"

#include "depman/error.hpp"

#include <algorithm>
#include <set>

namespace depman {

std::string_view to_string(ViolationCode code) noexcept {
    switch (code) {
    case ViolationCode::InvalidName: return "InvalidName";
    case ViolationCode::NameMismatch: return "NameMismatch";
    case ViolationCode::KindMismatch: return "KindMismatch";
    case ViolationCode::MissingDescriptor: return "MissingDescriptor";
    case ViolationCode::DescriptorMismatch: return "DescriptorMismatch";
    case ViolationCode::SchemaViolation: return "SchemaViolation";
    case ViolationCode::ChildrenNotAllowed: return "ChildrenNotAllowed";
    case ViolationCode::ChildCountMismatch: return "ChildCountMismatch";
    case ViolationCode::MissingChild: return "MissingChild";
    case ViolationCode::ChildMismatch: return "ChildMismatch";
    case ViolationCode::NestedApplication: return "NestedApplication";
    case ViolationCode::DuplicateName: return "DuplicateName";
    case ViolationCode::ReservedEntry: return "ReservedEntry";
    case ViolationCode::DepsMismatch: return "DepsMismatch";
    }
    return "?";
}

namespace {

bool is_unit_name(std::string_view name) {
    return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

bool is_dotted_version(std::string_view v) {
    if (v.empty() || v.front() == '.' || v.back() == '.') return false;
    char prev = '.';
    for (char c : v) {
        if (c == '.') {
            if (prev == '.') return false;
        } else if (c < '0' || c > '9') {
            return false;
        }
        prev = c;
    }
    return true;
}

std::vector<std::string> names_of(const DescriptorNode& descriptor, std::string_view element) {
    std::vector<std::string> out;
    for (const auto& node : descriptor.children) {
        if (node.name == element) out.push_back(node.attribute_or("name", ""));
    }
    return out;
}

std::vector<std::string> contained_modules(const DescriptorNode& descriptor) {
    std::vector<std::string> out;
    for (const auto& node : descriptor.children) {
        if (node.name == "contains") out.push_back(node.attribute_or("module", ""));
    }
    return out;
}

const std::string& root_attr(const DescriptorNode& root, std::string_view key) {
    const std::string* v = root.attribute(key);
    if (!v) throw Error(Errc::MalformedDescriptor, "<unit> lacks '" + std::string(key) + "'");
    return *v;
}

std::string extension_for(ModuleKind kind) {
    switch (kind) {
    case ModuleKind::application: return "app";
    case ModuleKind::web: return "web";
    case ModuleKind::component: return "cmp";
    case ModuleKind::adapter: return "ada";
    }
    return "bin";
}

class Validator {
public:
    std::vector<Violation> run(const DeployableUnit& unit) {
        check(unit, unit.name);
        check_component_names(unit);
        return std::move(out_);
    }

private:
    void add(ViolationCode code, std::string where) { out_.push_back({code, std::move(where)}); }

    void check(const DeployableUnit& unit, const std::string& path) {
        if (!is_unit_name(unit.name)) add(ViolationCode::InvalidName, path);

        const DescriptorNode& d = unit.descriptor;
        if (d.name != "unit") {
            add(ViolationCode::SchemaViolation, path + ":/" + d.name);
        }
        if (d.attribute_or("name", "") != unit.name) add(ViolationCode::NameMismatch, path + ":/unit/@name");
        if (d.attribute_or("kind", "") != to_string(unit.kind)) add(ViolationCode::KindMismatch, path + ":/unit/@kind");
        if (!is_dotted_version(d.attribute_or("version", "")) || d.attribute_or("version", "") != unit.version) {
            add(ViolationCode::SchemaViolation, path + ":/unit/@version");
        }
        if (d.text) add(ViolationCode::SchemaViolation, path + ":/unit/text()");

        auto descriptor_entry = unit.entries.find(std::string(kDescriptorEntry));
        if (descriptor_entry == unit.entries.end()) {
            add(ViolationCode::MissingDescriptor, path + ":" + std::string(kDescriptorEntry));
        } else {
            bool same = false;
            try {
                same = parse_xml(descriptor_entry->second) == d;
            } catch (const Error&) {
            }
            if (!same) add(ViolationCode::DescriptorMismatch, path + ":" + std::string(kDescriptorEntry));
        }

        auto deps_entry = unit.entries.find(std::string(kDepsEntry));
        bool deps_ok = false;
        if (deps_entry == unit.entries.end()) {
            deps_ok = unit.deps.empty();
        } else {
            try {
                deps_ok = parse_dependency_spec(deps_entry->second) == unit.deps;
            } catch (const Error&) {
            }
        }
        if (!deps_ok) add(ViolationCode::DepsMismatch, path + ":" + std::string(kDepsEntry));

        for (auto reserved : {kPlatformEntry, kManifestEntry}) {
            if (unit.entries.count(std::string(reserved))) add(ViolationCode::ReservedEntry, path + ":" + std::string(reserved));
        }

        check_elements(d, path);

        auto contains = contained_modules(d);
        if (unit.kind != ModuleKind::application) {
            if (!contains.empty() || !unit.children.empty()) add(ViolationCode::ChildrenNotAllowed, path);
            return;
        }
        if (contains.size() != unit.children.size()) {
            add(ViolationCode::ChildCountMismatch, path);
        }
        for (std::size_t i = 0; i < contains.size(); ++i) {
            const std::string& module = contains[i];
            auto entry = unit.entries.find(module);
            if (module.empty() || entry == unit.entries.end()) {
                add(ViolationCode::MissingChild, path + ":" + module);
                continue;
            }
            if (i >= unit.children.size()) continue;
            bool same = false;
            try {
                same = open_unit(entry->second) == unit.children[i];
            } catch (const Error&) {
            }
            if (!same) add(ViolationCode::ChildMismatch, path + ":" + module);
        }
        for (const auto& child : unit.children) {
            std::string child_path = path + "/" + child.name;
            if (child.kind == ModuleKind::application) add(ViolationCode::NestedApplication, child_path);
            check(child, child_path);
        }
    }

    void check_elements(const DescriptorNode& d, const std::string& path) {
        std::set<std::string> components;
        std::set<std::string> references;
        for (const auto& node : d.children) {
            std::string where = path + ":/unit/" + node.name;
            bool ok = node.children.empty() && !node.text;
            if (node.name == "component") {
                const std::string* n = node.attribute("name");
                ok = ok && n && is_unit_name(*n) && node.attributes.size() == 1;
                if (n && !components.insert(*n).second) add(ViolationCode::DuplicateName, where + "[@name='" + *n + "']");
            } else if (node.name == "reference") {
                const std::string* n = node.attribute("name");
                const std::string* t = node.attribute("type");
                ok = ok && n && !n->empty() && n->find('\'') == std::string::npos && t && *t == "resource" &&
                     node.attributes.size() == 2;
                if (n && !references.insert(*n).second) add(ViolationCode::DuplicateName, where + "[@name='" + *n + "']");
            } else if (node.name == "contains") {
                const std::string* m = node.attribute("module");
                ok = ok && m && !m->empty() && node.attributes.size() == 1;
            } else {
                ok = false;
            }
            if (!ok) add(ViolationCode::SchemaViolation, where);
        }
    }

    // Manifest entries are keyed by component name across the whole tree.
    void check_component_names(const DeployableUnit& unit) {
        std::set<std::string> seen;
        auto visit = [&](const DeployableUnit& u, const std::string& path) {
            std::set<std::string> local;
            for (const auto& c : component_names(u)) {
                if (local.insert(c).second && !seen.insert(c).second) {
                    add(ViolationCode::DuplicateName, path + ":/unit/component[@name='" + c + "']");
                }
            }
        };
        visit(unit, unit.name);
        for (const auto& child : unit.children) visit(child, unit.name + "/" + child.name);
    }

    std::vector<Violation> out_;
};

} // namespace

std::optional<ModuleKind> kind_from_extension(std::string_view entry) noexcept {
    auto dot = entry.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    auto ext = entry.substr(dot + 1);
    if (ext == "app") return ModuleKind::application;
    if (ext == "web") return ModuleKind::web;
    if (ext == "cmp") return ModuleKind::component;
    if (ext == "ada") return ModuleKind::adapter;
    return std::nullopt;
}

std::vector<std::string> component_names(const DeployableUnit& unit) { return names_of(unit.descriptor, "component"); }

std::vector<std::string> reference_names(const DeployableUnit& unit) { return names_of(unit.descriptor, "reference"); }

DeployableUnit open_unit(std::string_view archive) {
    if (!zip::looks_like_zip(archive)) throw Error(Errc::NotAnArchive, "missing ZIP signature");
    return open_unit_entries(zip::read(archive));
}

DeployableUnit open_unit_entries(zip::Entries entries) {
    auto descriptor_entry = entries.find(std::string(kDescriptorEntry));
    if (descriptor_entry == entries.end()) throw Error(Errc::MissingDescriptor, std::string(kDescriptorEntry));

    DeployableUnit unit;
    unit.descriptor = parse_xml(descriptor_entry->second);
    if (unit.descriptor.name != "unit") throw Error(Errc::MalformedDescriptor, "root element must be <unit>");
    unit.name = root_attr(unit.descriptor, "name");
    const std::string& kind_text = root_attr(unit.descriptor, "kind");
    auto kind = parse_module_kind(kind_text);
    if (!kind) throw Error(Errc::MalformedDescriptor, "unknown kind '" + kind_text + "'");
    unit.kind = *kind;
    unit.version = root_attr(unit.descriptor, "version");

    if (auto deps = entries.find(std::string(kDepsEntry)); deps != entries.end()) {
        unit.deps = parse_dependency_spec(deps->second);
    }

    if (unit.kind == ModuleKind::application) {
        for (const auto& module : contained_modules(unit.descriptor)) {
            auto child_entry = entries.find(module);
            if (module.empty() || child_entry == entries.end()) {
                throw Error(Errc::MissingChild, "'" + module + "' named in <contains> of " + unit.name);
            }
            DeployableUnit child = open_unit(child_entry->second);
            if (auto expected = kind_from_extension(module); expected && *expected != child.kind) {
                throw Error(Errc::KindMismatch, "'" + module + "' is expected to be " + std::string(to_string(*expected)) +
                                                    " but declares " + std::string(to_string(child.kind)));
            }
            unit.children.push_back(std::move(child));
        }
    }
    unit.entries = std::move(entries);
    return unit;
}

std::vector<Violation> validate_unit(const DeployableUnit& unit) { return Validator{}.run(unit); }

std::string write_unit(const DeployableUnit& unit) { return zip::write(unit.entries); }

UnitBuilder::UnitBuilder(std::string name, ModuleKind kind, std::string version)
    : name_(std::move(name)), kind_(kind), version_(std::move(version)) {}

UnitBuilder& UnitBuilder::component(std::string name) {
    elements_.push_back({"component", {{"name", std::move(name)}}, std::nullopt, {}});
    return *this;
}

UnitBuilder& UnitBuilder::reference(std::string name) {
    elements_.push_back({"reference", {{"name", std::move(name)}, {"type", "resource"}}, std::nullopt, {}});
    return *this;
}

UnitBuilder& UnitBuilder::child(DeployableUnit unit, std::string entry) {
    if (entry.empty()) entry = unit.name + "." + extension_for(unit.kind);
    elements_.push_back({"contains", {{"module", entry}}, std::nullopt, {}});
    children_.emplace_back(std::move(entry), std::move(unit));
    return *this;
}

UnitBuilder& UnitBuilder::deps(DependencySpec spec) {
    deps_ = std::move(spec);
    return *this;
}

UnitBuilder& UnitBuilder::entry(std::string path, std::string bytes) {
    extra_[std::move(path)] = std::move(bytes);
    return *this;
}

DeployableUnit UnitBuilder::build() const {
    DeployableUnit unit;
    unit.name = name_;
    unit.kind = kind_;
    unit.version = version_;
    unit.descriptor = {"unit", {{"name", name_}, {"kind", std::string(to_string(kind_))}, {"version", version_}},
                       std::nullopt, elements_};
    unit.deps = deps_;
    unit.entries = extra_;
    unit.entries[std::string(kDescriptorEntry)] = canonical_bytes(unit.descriptor);
    if (!deps_.empty()) unit.entries[std::string(kDepsEntry)] = serialize_dependency_spec(deps_);
    for (const auto& [entry, child] : children_) {
        unit.entries[entry] = write_unit(child);
        unit.children.push_back(child);
    }
    return unit;
}

} // namespace depman
