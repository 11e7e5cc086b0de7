#include "depman/depres.hpp"

#include "depman/error.hpp"

#include <algorithm>
#include <queue>

namespace depman {

bool ServerSnapshot::has_unit(const std::string& unit) const {
    if (installed.count(unit)) return true;
    return std::any_of(installed.begin(), installed.end(), [&](const auto& kv) {
        const auto& children = kv.second.children;
        return std::find(children.begin(), children.end(), unit) != children.end();
    });
}

std::string_view to_string(DependencyKind kind) noexcept {
    switch (kind) {
    case DependencyKind::unit: return "unit";
    case DependencyKind::service: return "service";
    case DependencyKind::resource: return "resource";
    case DependencyKind::site_link: return "site-link";
    }
    return "?";
}

void DependencyGraph::add_node(const std::string& name, const DependencySpec& deps) {
    nodes.insert(name);
    env[name] = deps;
    for (const auto& prereq : deps.requires_unit) edges.emplace(name, prereq);
}

DependencyGraph build_graph(const std::vector<DeployableUnit>& units) {
    DependencyGraph g;
    for (const auto& u : units) {
        if (g.nodes.count(u.name)) throw Error(Errc::DuplicateUnitName, "'" + u.name + "'");
        g.add_node(u.name, u.deps);
    }
    return g;
}

namespace {

// prerequisite -> dependents, restricted to internal nodes
std::map<std::string, std::vector<std::string>> internal_dependents(const DependencyGraph& g,
                                                                   std::map<std::string, int>& indegree) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : g.nodes) indegree[n] = 0;
    for (const auto& [dependent, prereq] : g.edges) {
        if (!g.nodes.count(dependent) || !g.nodes.count(prereq)) continue;
        out[prereq].push_back(dependent);
        ++indegree[dependent];
    }
    return out;
}

} // namespace

std::vector<std::string> find_cycle(const DependencyGraph& g) {
    // Nodes that survive Kahn elimination all lie on or behind a cycle;
    // walking smallest prerequisites among them must revisit a node.
    std::map<std::string, int> indegree;
    auto dependents = internal_dependents(g, indegree);
    std::queue<std::string> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.push(n);
    }
    std::set<std::string> remaining(g.nodes.begin(), g.nodes.end());
    while (!ready.empty()) {
        std::string n = ready.front();
        ready.pop();
        remaining.erase(n);
        for (const auto& dep : dependents[n]) {
            if (--indegree[dep] == 0) ready.push(dep);
        }
    }
    if (remaining.empty()) return {};

    auto next_prereq = [&](const std::string& n) -> std::string {
        auto it = g.edges.lower_bound({n, std::string{}});
        for (; it != g.edges.end() && it->first == n; ++it) {
            if (remaining.count(it->second)) return it->second;
        }
        return {};
    };
    std::vector<std::string> walk;
    std::map<std::string, std::size_t> seen;
    std::string cur = *remaining.begin();
    // A remaining node with no remaining prerequisite would have been
    // eliminated, so next_prereq never returns empty here.
    while (!seen.count(cur)) {
        seen[cur] = walk.size();
        walk.push_back(cur);
        cur = next_prereq(cur);
    }
    std::vector<std::string> cycle(walk.begin() + static_cast<std::ptrdiff_t>(seen[cur]), walk.end());
    std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
    return cycle;
}

std::vector<std::string> install_order(const DependencyGraph& g) {
    std::map<std::string, int> indegree;
    auto dependents = internal_dependents(g, indegree);
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.push(n);
    }
    std::vector<std::string> order;
    order.reserve(g.nodes.size());
    while (!ready.empty()) {
        std::string n = ready.top();
        ready.pop();
        order.push_back(n);
        for (const auto& dep : dependents[n]) {
            if (--indegree[dep] == 0) ready.push(dep);
        }
    }
    if (order.size() != g.nodes.size()) {
        auto cycle = find_cycle(g);
        std::string text = "[";
        for (std::size_t i = 0; i < cycle.size(); ++i) text += (i ? ", " : "") + cycle[i];
        throw Error(Errc::CycleDetected, text + "]");
    }
    return order;
}

std::vector<std::string> stop_order(const DependencyGraph& g) {
    auto order = install_order(g);
    std::reverse(order.begin(), order.end());
    return order;
}

namespace {

void check_one(const DeployableUnit& unit, const std::set<std::string>& siblings, const ServerSnapshot& server,
               std::vector<UnsatisfiedDependency>& out) {
    const DependencySpec& deps = unit.deps;
    for (const auto& u : deps.requires_unit) {
        if (!siblings.count(u) && !server.has_unit(u)) out.push_back({unit.name, DependencyKind::unit, u});
    }
    for (auto s : deps.requires_service) {
        if (!is_mandatory(s) && !server.services.count(s)) {
            out.push_back({unit.name, DependencyKind::service, std::string(to_string(s))});
        }
    }
    for (const auto& r : deps.requires_resource) {
        auto it = server.resources.find(r.resource);
        if (it == server.resources.end() || it->second != r.service) {
            out.push_back({unit.name, DependencyKind::resource, r.resource + "@" + std::string(to_string(r.service))});
        }
    }
    for (const auto& link : deps.requires_site_link) {
        if (server.registry_site != link.site) {
            out.push_back({unit.name, DependencyKind::site_link, std::string(to_string(link.service)) + "→" + link.site});
        }
    }
}

} // namespace

std::vector<UnsatisfiedDependency> check_against_target(const DeployableUnit& unit, const ServerSnapshot& server) {
    std::vector<UnsatisfiedDependency> out;
    std::set<std::string> siblings;
    for (const auto& child : unit.children) siblings.insert(child.name);
    std::set<std::string> for_root = siblings;
    check_one(unit, for_root, server, out);
    siblings.insert(unit.name);
    for (const auto& child : unit.children) check_one(child, siblings, server, out);
    return out;
}

} // namespace depman
