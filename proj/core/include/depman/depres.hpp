#pragma once

#include "depman/dependency.hpp"
#include "depman/snapshot.hpp"
#include "depman/unit.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace depman {

/// Units plus their requires-unit edges and environmental requirements.
/// Edge targets that are not nodes are external prerequisites: they are
/// expected to be installed on the target already.
struct DependencyGraph {
    std::set<std::string> nodes;
    /// (dependent, prerequisite)
    std::set<std::pair<std::string, std::string>> edges;
    std::map<std::string, DependencySpec> env;

    void add_node(const std::string& name, const DependencySpec& deps);

    friend bool operator==(const DependencyGraph&, const DependencyGraph&) = default;
};

enum class DependencyKind { unit, service, resource, site_link };

std::string_view to_string(DependencyKind kind) noexcept;

struct UnsatisfiedDependency {
    std::string unit;
    DependencyKind kind;
    /// The missing prerequisite: `bankRA`, `mail`, `MailFactory1@mail`,
    /// `registry→siteB`.
    std::string detail;
    friend bool operator==(const UnsatisfiedDependency&, const UnsatisfiedDependency&) = default;
};

/// Throws Error{DuplicateUnitName}.
DependencyGraph build_graph(const std::vector<DeployableUnit>& units);

/// Prerequisites first; among ready nodes the lexicographically smallest
/// name goes next. External prerequisites are left out. Throws
/// Error{CycleDetected} whose detail lists one cycle, e.g. `[a, b]`.
std::vector<std::string> install_order(const DependencyGraph& graph);

/// Reverse of install_order: dependents before prerequisites.
std::vector<std::string> stop_order(const DependencyGraph& graph);

/// One witness cycle, rotated to start at its smallest node; empty when
/// the internal graph is acyclic.
std::vector<std::string> find_cycle(const DependencyGraph& graph);

/// Requirements of `unit` (and, for applications, of its children) that
/// `server` does not satisfy. Siblings inside the same application satisfy
/// each other's requires-unit.
std::vector<UnsatisfiedDependency> check_against_target(const DeployableUnit& unit, const ServerSnapshot& server);

} // namespace depman
