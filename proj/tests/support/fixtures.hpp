#pragma once

#include <depman/agent.hpp>
#include <depman/config.hpp>
#include <depman/manager.hpp>
#include <depman/unit.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fixture {

using namespace depman;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    int between(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    bool chance(double p) { return std::bernoulli_distribution(p)(gen_); }
    template <class T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(between(0, static_cast<int>(items.size()) - 1))];
    }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        for (auto& c : s) c = static_cast<char>(between(0, 255));
        return s;
    }
    std::string token(int min_len = 1, int max_len = 8) {
        static const std::string first = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
        static const std::string rest = first + "0123456789_-";
        std::string s(1, first[static_cast<std::size_t>(between(0, static_cast<int>(first.size()) - 1))]);
        int len = between(min_len, max_len);
        while (static_cast<int>(s.size()) < len) {
            s.push_back(rest[static_cast<std::size_t>(between(0, static_cast<int>(rest.size()) - 1))]);
        }
        return s;
    }
    /// Text with markup characters, control whitespace and multi-byte UTF-8.
    std::string text(int max_len = 12) {
        static const std::vector<std::string> pieces = {"a", "Z", "7", " ", "&", "<", ">", "\"", "'", "\t",
                                                        "\n", "\r", "é", "→", "中", "x y", "&amp;", "]]>"};
        std::string s = token(1, 2);
        int n = between(0, max_len);
        for (int i = 0; i < n; ++i) s += pick(pieces);
        return s;
    }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Random element-only / text-only tree obeying the descriptor rules.
inline DescriptorNode random_tree(Rng& rng, int depth = 3) {
    DescriptorNode n;
    n.name = rng.token();
    int attrs = rng.between(0, 4);
    for (int i = 0; i < attrs; ++i) n.attributes[rng.token()] = rng.chance(0.2) ? "" : rng.text();
    if (depth > 0 && rng.chance(0.6)) {
        int kids = rng.between(1, 4);
        for (int i = 0; i < kids; ++i) n.children.push_back(random_tree(rng, depth - 1));
    } else if (rng.chance(0.5)) {
        n.text = rng.text();
    }
    return n;
}

/// Hands out names unique within one generated unit tree.
class Names {
public:
    explicit Names(Rng& rng) : rng_(rng) {}
    std::string next(const std::string& prefix) { return prefix + std::to_string(counter_++) + rng_.token(1, 3); }

private:
    Rng& rng_;
    int counter_ = 0;
};

inline DeployableUnit random_leaf(Rng& rng, Names& names, const std::string& name, ModuleKind kind) {
    UnitBuilder b(name, kind, std::to_string(rng.between(1, 3)) + "." + std::to_string(rng.between(0, 9)));
    int comps = rng.between(0, 3);
    for (int i = 0; i < comps; ++i) b.component(names.next("Bean"));
    int refs = rng.between(0, 3);
    for (int i = 0; i < refs; ++i) b.reference(names.next("ref/R"));
    if (rng.chance(0.3)) b.entry("lib/payload.bin", rng.bytes(static_cast<std::size_t>(rng.between(0, 300))));
    if (rng.chance(0.3)) {
        DependencySpec deps;
        if (rng.chance(0.5)) deps.requires_service.push_back(rng.chance(0.5) ? Service::mail : Service::ws);
        if (rng.chance(0.5)) deps.requires_unit.push_back(names.next("ext"));
        if (rng.chance(0.3)) deps.requires_resource.push_back({names.next("Res"), Service::transaction});
        b.deps(deps);
    }
    return b.build();
}

/// A valid unit: a leaf of random kind, or an application of 1-3 leaves.
inline DeployableUnit random_unit(Rng& rng, std::string name = {}) {
    Names names(rng);
    if (name.empty()) name = names.next("unit");
    static const std::vector<ModuleKind> leaf_kinds = {ModuleKind::web, ModuleKind::component, ModuleKind::adapter};
    if (rng.chance(0.5)) return random_leaf(rng, names, name, rng.pick(leaf_kinds));
    UnitBuilder app(name, ModuleKind::application);
    int kids = rng.between(1, 3);
    for (int i = 0; i < kids; ++i) app.child(random_leaf(rng, names, names.next("m"), rng.pick(leaf_kinds)));
    if (rng.chance(0.5)) app.component(names.next("AppBean"));
    if (rng.chance(0.5)) app.reference(names.next("ref/App"));
    return app.build();
}

/// Binds every reference of `config` to a fresh resource name.
inline DeploymentConfiguration bind_all(DeploymentConfiguration config, Rng& rng,
                                        std::map<std::string, std::string>* chosen = nullptr) {
    for (const auto& ref : unbound_references(config)) {
        std::string res = "DS" + rng.token(2, 6);
        if (chosen) (*chosen)[ref] = res;
        config = depman::bind(std::move(config), ref, res);
    }
    return config;
}

inline DeployedUnit deploy(const DeployableUnit& unit, const std::map<std::string, std::string>& bindings = {}) {
    DeploymentConfiguration config = create_configuration(unit);
    for (const auto& [ref, res] : bindings) config = depman::bind(std::move(config), ref, res);
    return generate_deployed_unit(unit, config);
}

// Fixtures shaped after the account-application example: an adapter
// `bankRA` and an application `acctApp` (component `acct`, web `front`).

inline DeployableUnit bank_adapter() {
    return UnitBuilder("bankRA", ModuleKind::adapter).component("BankConnector").build();
}

inline DeployableUnit acct_component() {
    return UnitBuilder("acct", ModuleKind::component).component("AccountBean").reference("jdbc/AccountDB").build();
}

inline DeployableUnit front_web() {
    return UnitBuilder("front", ModuleKind::web).component("FrontServlet").reference("mail/Notify").build();
}

/// acctApp, optionally declaring that it needs bankRA. Its `eis/Bank`
/// reference stands for the connection the adapter would provide.
inline DeployableUnit acct_app(bool requires_bank = true) {
    DependencySpec deps;
    if (requires_bank) deps.requires_unit = {"bankRA"};
    return UnitBuilder("acctApp", ModuleKind::application)
        .child(acct_component())
        .child(front_web())
        .reference("eis/Bank")
        .deps(deps)
        .build();
}

inline std::map<std::string, std::string> acct_bindings() {
    return {{"jdbc/AccountDB", "AccountDS"}, {"mail/Notify", "MailFactory1"}, {"eis/Bank", "BankEIS"}};
}

inline ServerConfig server(const std::string& id, const std::string& site = "siteA",
                           std::set<Service> services = {}, std::map<std::string, Service> resources = {}) {
    ServerConfig c;
    c.id = id;
    c.site = site;
    c.services = std::move(services);
    c.resources = std::move(resources);
    return c;
}

/// Server holding every resource acctApp binds.
inline ServerConfig acct_server(const std::string& id) {
    return server(id, "siteA", {Service::mail},
                  {{"AccountDS", Service::transaction}, {"MailFactory1", Service::mail}, {"BankEIS", Service::transaction}});
}

inline Target server_target(const Agent& agent) {
    Target t;
    t.id = agent.id();
    t.endpoint = agent.endpoint().to_string();
    t.site = agent.config().site;
    return t;
}

inline Target group_target(std::string id, std::vector<std::string> members) {
    Target t;
    t.id = std::move(id);
    t.kind = Target::Kind::group;
    t.members = std::move(members);
    return t;
}

/// In-process agents plus a manager over them.
struct Cluster {
    std::vector<std::unique_ptr<Agent>> agents;
    std::unique_ptr<DeploymentManager> manager;

    explicit Cluster(std::vector<ServerConfig> configs, std::vector<Target> groups = {}) {
        std::vector<Target> targets;
        for (auto& c : configs) {
            agents.push_back(Agent::run(std::move(c)));
            targets.push_back(server_target(*agents.back()));
        }
        for (auto& g : groups) targets.push_back(std::move(g));
        manager = DeploymentManager::with_targets(std::move(targets));
    }

    Agent& agent(const std::string& id) {
        for (auto& a : agents) {
            if (a->id() == id) return *a;
        }
        throw std::out_of_range(id);
    }
    const Target& target(const std::string& id) const { return manager->target(id); }
};

inline DeploymentStatus finish(const std::shared_ptr<ProgressObject>& p) {
    auto s = p->wait_for(std::chrono::seconds(20));
    if (!s) throw std::runtime_error("operation did not finish");
    return *s;
}

inline TargetModuleID tmid(const std::string& unit, const std::string& server) { return {unit, server, std::nullopt}; }

/// Port that was free a moment ago and refuses connections now.
inline std::string dead_endpoint() {
    wire::FrameServer probe(wire::Endpoint{"127.0.0.1", 0}, [](std::string_view) { return std::string(); });
    std::string ep = probe.endpoint().to_string();
    probe.stop();
    return ep;
}

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 gen{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("depman-test-" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace fixture
