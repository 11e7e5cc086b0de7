#pragma once

#include "depman/dependency.hpp"
#include "depman/types.hpp"
#include "depman/xml.hpp"
#include "depman/zip.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace depman {

inline constexpr std::string_view kDescriptorEntry = "META-INF/unit.xml";
inline constexpr std::string_view kDepsEntry = "META-INF/deps.xml";
inline constexpr std::string_view kPlatformEntry = "META-INF/platform.xml";
inline constexpr std::string_view kManifestEntry = "META-INF/stubs.manifest";

/// A deployable archive with its parsed standard descriptor. `entries`
/// holds every archive member, including the descriptor and the nested
/// archives of application children.
struct DeployableUnit {
    std::string name;
    ModuleKind kind = ModuleKind::web;
    std::string version;
    zip::Entries entries;
    DescriptorNode descriptor;
    std::vector<DeployableUnit> children;
    DependencySpec deps;

    friend bool operator==(const DeployableUnit&, const DeployableUnit&) = default;
};

enum class ViolationCode {
    InvalidName,
    NameMismatch,
    KindMismatch,
    MissingDescriptor,
    DescriptorMismatch,
    SchemaViolation,
    ChildrenNotAllowed,
    ChildCountMismatch,
    MissingChild,
    ChildMismatch,
    NestedApplication,
    DuplicateName,
    ReservedEntry,
    DepsMismatch,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
    ViolationCode code;
    /// Unit path plus offending entry or element, e.g. `app/front:/unit/component`.
    std::string where;
    friend bool operator==(const Violation&, const Violation&) = default;
};

/// Opens a unit archive; application children are opened recursively from
/// the `<contains module>` entries. Throws Error{NotAnArchive,
/// MissingDescriptor, MalformedDescriptor, KindMismatch, MissingChild}.
DeployableUnit open_unit(std::string_view archive);

/// Same as open_unit over already-extracted entries.
DeployableUnit open_unit_entries(zip::Entries entries);

/// Structural checks; an empty result means every unit invariant holds.
std::vector<Violation> validate_unit(const DeployableUnit& unit);

/// ZIP bytes with entries in path order.
std::string write_unit(const DeployableUnit& unit);

/// Kind implied by a child archive's extension (.app, .web, .cmp, .ada).
std::optional<ModuleKind> kind_from_extension(std::string_view entry) noexcept;

/// Names of `<component>` elements of this unit (not its children).
std::vector<std::string> component_names(const DeployableUnit& unit);
/// Names of `<reference>` elements of this unit (not its children).
std::vector<std::string> reference_names(const DeployableUnit& unit);

/// Assembles a consistent unit: writes the descriptor and deps entries and
/// embeds children as nested archives.
class UnitBuilder {
public:
    UnitBuilder(std::string name, ModuleKind kind, std::string version = "1.0");

    UnitBuilder& component(std::string name);
    UnitBuilder& reference(std::string name);
    /// Application only; `entry` defaults to `<child name>.<ext>`.
    UnitBuilder& child(DeployableUnit unit, std::string entry = {});
    UnitBuilder& deps(DependencySpec spec);
    UnitBuilder& entry(std::string path, std::string bytes);

    DeployableUnit build() const;

private:
    std::string name_;
    ModuleKind kind_;
    std::string version_;
    std::vector<DescriptorNode> elements_;
    std::vector<std::pair<std::string, DeployableUnit>> children_;
    DependencySpec deps_;
    zip::Entries extra_;
};

} // namespace depman
