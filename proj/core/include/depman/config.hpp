#pragma once

#include "depman/unit.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depman {

/// Platform-side counterpart of one descriptor element. Roots stand for a
/// deployable (the unit or one application child); their children stand
/// for `<component>` and `<reference>` elements.
struct ConfigNode {
    std::string deployable;
    /// Locates the descriptor element inside the deployable's own descriptor.
    std::string xpath;
    std::optional<std::string> component_name;
    std::optional<std::string> reference_name;
    std::optional<std::string> binding;
    std::vector<ConfigNode> children;

    friend bool operator==(const ConfigNode&, const ConfigNode&) = default;
};

struct DeploymentConfiguration {
    std::string unit_name;
    std::vector<ConfigNode> roots;

    /// Every reference node has a binding.
    bool complete() const;

    friend bool operator==(const DeploymentConfiguration&, const DeploymentConfiguration&) = default;
};

struct InterpositionManifest {
    struct Entry {
        std::string component;
        std::string digest; // 16 lowercase hex chars
        friend bool operator==(const Entry&, const Entry&) = default;
    };
    std::vector<Entry> entries; // sorted by component

    /// `stub:<component>:<digest>\n` lines.
    std::string serialize() const;
    /// Throws Error{NotConfigured} on a malformed manifest.
    static InterpositionManifest parse(std::string_view text);

    friend bool operator==(const InterpositionManifest&, const InterpositionManifest&) = default;
};

/// A configured unit: the input archive plus platform configuration and
/// the stub manifest.
struct DeployedUnit {
    DeployableUnit base;
    DeploymentConfiguration config;
    InterpositionManifest manifest;

    const std::string& name() const { return base.name; }

    friend bool operator==(const DeployedUnit&, const DeployedUnit&) = default;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string to_hex16(std::uint64_t value);

/// Throws Error{InvalidUnit} when validate_unit reports violations.
DeploymentConfiguration create_configuration(const DeployableUnit& unit);

/// Binds every reference node named `reference` (overwriting earlier
/// bindings). Throws Error{UnknownReference}.
DeploymentConfiguration bind(DeploymentConfiguration config, std::string_view reference, std::string_view resource);

/// Sorted, unique names of references still lacking a binding.
std::vector<std::string> unbound_references(const DeploymentConfiguration& config);

/// `<platform-config>` document in canonical form; incomplete
/// configurations are allowed.
std::string save_configuration(const DeploymentConfiguration& config);

/// Throws Error{MalformedConfiguration}.
DeploymentConfiguration restore_configuration(std::string_view data);

/// Bytes hashed for one component's stub digest: canonical descriptor
/// element, a NUL, then the deployable's sorted `ref=resource\n` lines.
std::string stub_digest_input(const DescriptorNode& component, const std::vector<std::pair<std::string, std::string>>& bindings);

/// Throws Error{IncompleteConfiguration, ForeignConfiguration}.
DeployedUnit generate_deployed_unit(const DeployableUnit& unit, const DeploymentConfiguration& config);

/// Archive entries of a deployed unit: base entries plus platform.xml and
/// stubs.manifest.
zip::Entries deployed_entries(const DeployedUnit& unit);
std::string write_unit(const DeployedUnit& unit);

/// Opens a configured archive and checks its manifest against the
/// embedded configuration. Throws Error{NotConfigured} for raw units.
DeployedUnit open_deployed_unit(std::string_view archive);

} // namespace depman
