#pragma once

#include "depman/config.hpp"
#include "depman/snapshot.hpp"
#include "depman/wire.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace depman {

/// Static description of a simulated application server, normally read
/// from `server.xml`:
///
///     <server id="s1" endpoint="127.0.0.1:7001" site="siteA">
///       <service name="mail"/>
///       <registry server="s2" site="siteB"/>
///       <resource name="MailFactory1" service="mail"/>
///     </server>
///
/// `<registry>` is optional and defaults to the server's own registry.
struct ServerConfig {
    std::string id;
    std::string endpoint = "127.0.0.1:0";
    std::string site;
    std::set<Service> services; // optional services only
    std::string registry_endpoint = "self";
    std::string registry_site; // empty means `site`
    std::map<std::string, Service> resources;

    /// Throws Error{MalformedServerConfig} when an invariant is broken.
    void validate() const;

    static ServerConfig parse_xml(std::string_view text);
    std::string to_xml() const;
};

/// Server-side bookkeeping without any transport: installed modules with
/// their lifecycle state, services, resources and an event log. Guard
/// violations throw Error with the matching code. Not synchronized.
class AgentState {
public:
    explicit AgentState(const ServerConfig& config);

    struct InstallResult {
        std::string unit;
        ModuleKind kind;
        std::vector<std::string> children;
    };

    /// Throws Error{NotConfigured, AlreadyInstalled}.
    InstallResult install(std::string_view archive);
    /// Runtime resolution, then children in install order, then the unit.
    /// Throws Error{NotInstalled, AlreadyRunning, MissingResource, ServiceUnavailable}.
    void start(const std::string& unit);
    /// Throws Error{NotInstalled, NotRunning}.
    void stop(const std::string& unit);
    /// Throws Error{NotInstalled, StillRunning, HasDependents}.
    void uninstall(const std::string& unit);
    /// Returns false when the identical resource already existed. Throws
    /// Error{ServiceUnavailable, ConflictingService}.
    bool create_resource(const std::string& name, Service service);

    ServerSnapshot snapshot() const;
    const std::vector<std::string>& events() const noexcept { return events_; }
    const ServerConfig& config() const noexcept { return config_; }

    /// Writes `state.json` plus one archive per module under `dir/modules`.
    void save(const std::filesystem::path& dir) const;
    /// Restores what save() wrote; a directory without `state.json`
    /// leaves the state untouched.
    void load(const std::filesystem::path& dir);

    /// JSON text of the state document (without archives).
    std::string state_json() const;

private:
    struct Module {
        DeployedUnit unit;
        std::string archive;
        ModuleState state = ModuleState::installed;
    };

    void resolve(const DeployedUnit& unit, const DeployableUnit& deployable) const;
    std::vector<std::string> child_order(const DeployableUnit& unit) const;

    ServerConfig config_;
    std::set<Service> services_;
    std::map<std::string, Service> resources_;
    std::map<std::string, Module> modules_;
    std::vector<std::string> events_;
};

/// A running agent: AgentState behind the framed JSON protocol. Mutating
/// requests take an exclusive lock; LIST, SNAPSHOT and HELLO share it.
class Agent {
public:
    /// Binds the configured endpoint (port 0 picks one) and loads state from
    /// `data_dir` when given. Throws Error{EndpointInUse}.
    static std::unique_ptr<Agent> run(ServerConfig config, std::filesystem::path data_dir = {});

    ~Agent();
    Agent(const Agent&) = delete;
    Agent& operator=(const Agent&) = delete;

    const wire::Endpoint& endpoint() const;
    const std::string& id() const noexcept { return config_.id; }
    const ServerConfig& config() const noexcept { return config_; }

    /// Answers one request payload; never throws for a malformed request.
    std::string handle_request(std::string_view payload);

    ServerSnapshot snapshot() const;
    bool create_resource(const std::string& name, Service service);
    std::vector<std::string> event_log() const;

    /// Stops accepting requests and persists state to the data directory.
    void shutdown();

private:
    Agent(ServerConfig config, std::filesystem::path data_dir);

    ServerConfig config_;
    std::filesystem::path data_dir_;
    mutable std::shared_mutex mu_;
    AgentState state_;
    std::unique_ptr<wire::FrameServer> server_;
    bool shut_down_ = false;
};

} // namespace depman
