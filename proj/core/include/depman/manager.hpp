#pragma once

#include "depman/config.hpp"
#include "depman/depres.hpp"
#include "depman/wire.hpp"

#include <chrono>
#include <compare>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace depman {

/// A deployment destination: one server, or a named group of servers.
struct Target {
    enum class Kind { server, group };

    std::string id;
    Kind kind = Kind::server;
    std::string endpoint;             // server only, host:port
    std::string site;                 // server only
    std::vector<std::string> members; // group only, server ids

    bool is_group() const noexcept { return kind == Kind::group; }
    friend bool operator==(const Target&, const Target&) = default;
};

/// Parses `targets.xml`:
/// `<targets><server id endpoint site/><group id><member ref/></group></targets>`.
/// Groups may only reference servers. Throws Error{MalformedTargets}.
std::vector<Target> parse_targets_xml(std::string_view text);
std::string targets_to_xml(const std::vector<Target>& targets);

/// Handle to one module installed on one server. Application children
/// carry the name of their parent.
struct TargetModuleID {
    std::string unit_name;
    std::string server_id;
    std::optional<std::string> parent;

    /// `unit@server`, or `parent/unit@server` for children.
    std::string to_string() const;
    /// Throws std::invalid_argument.
    static TargetModuleID parse(std::string_view text);

    bool is_root() const noexcept { return !parent.has_value(); }
    friend bool operator==(const TargetModuleID&, const TargetModuleID&) = default;
    friend std::strong_ordering operator<=>(const TargetModuleID& a, const TargetModuleID& b) {
        if (auto c = a.server_id <=> b.server_id; c != 0) return c;
        if (auto c = a.unit_name <=> b.unit_name; c != 0) return c;
        return a.parent <=> b.parent;
    }
};

enum class CommandType { distribute, start, stop, undeploy };
enum class StateType { running, completed, failed };

std::string_view to_string(CommandType c) noexcept;
std::string_view to_string(StateType s) noexcept;

struct DeploymentStatus {
    StateType state = StateType::running;
    CommandType command = CommandType::distribute;
    std::string message;

    bool terminal() const noexcept { return state != StateType::running; }
    friend bool operator==(const DeploymentStatus&, const DeploymentStatus&) = default;
};

/// Tracks one long-lived operation. Poll it with status(), or register
/// listeners: every listener sees the terminal status exactly once, even
/// when added after completion (it is then called right away, on the
/// caller's thread). Progress events before that are best effort.
class ProgressObject {
public:
    using Listener = std::function<void(const DeploymentStatus&)>;

    explicit ProgressObject(CommandType command);

    DeploymentStatus status() const;
    std::vector<TargetModuleID> result_ids() const;
    void add_listener(Listener listener);

    /// Blocks until the status is terminal.
    DeploymentStatus wait() const;
    std::optional<DeploymentStatus> wait_for(std::chrono::milliseconds timeout) const;

    // Producer side.
    void report(std::string message);
    /// Only the first call has an effect.
    void finish(StateType state, std::string message, std::vector<TargetModuleID> results);

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    DeploymentStatus status_;
    std::vector<TargetModuleID> results_;
    std::vector<Listener> listeners_;
};

enum class ModuleFilter { available, running, non_running };

std::optional<ModuleFilter> parse_module_filter(std::string_view text) noexcept;

/// The tool-facing deployment manager. Connected managers talk to agents;
/// disconnected managers only offer the configuration operations.
///
/// Operations on distinct servers run concurrently; operations touching
/// the same server run one at a time in submission order.
class DeploymentManager {
public:
    /// `depman://host:port/` (the target registry) or `depman:disconnected`.
    /// Throws Error{MalformedUri, ConnectionRefused}.
    static std::unique_ptr<DeploymentManager> connect(std::string_view uri);
    /// A connected manager over a fixed target list.
    static std::unique_ptr<DeploymentManager> with_targets(std::vector<Target> targets);

    ~DeploymentManager();
    DeploymentManager(const DeploymentManager&) = delete;
    DeploymentManager& operator=(const DeploymentManager&) = delete;

    bool disconnected() const noexcept { return disconnected_; }

    // Configuration operations, available in both modes.
    DeploymentConfiguration create_configuration(const DeployableUnit& unit) const;
    DeployedUnit generate_deployed_unit(const DeployableUnit& unit, const DeploymentConfiguration& config) const;

    /// Servers first, then groups, each sorted by id. Throws Error{Disconnected}.
    std::vector<Target> targets() const;
    /// Throws Error{Disconnected, UnknownTarget}.
    const Target& target(std::string_view id) const;

    /// Groups expand to their servers. Per server: optional dependency check
    /// against a fresh snapshot, then INSTALL. Non-atomic across servers.
    std::shared_ptr<ProgressObject> distribute(const std::vector<Target>& targets, const DeployedUnit& unit,
                                               bool check_deps = true);
    std::shared_ptr<ProgressObject> start(const std::vector<TargetModuleID>& ids);
    std::shared_ptr<ProgressObject> stop(const std::vector<TargetModuleID>& ids);
    std::shared_ptr<ProgressObject> undeploy(const std::vector<TargetModuleID>& ids);

    /// Root modules on the given targets, sorted by (server, unit).
    /// Throws Error{Disconnected, UnknownTarget, AgentUnreachable}.
    std::vector<TargetModuleID> list_modules(std::optional<ModuleKind> kind, const std::vector<Target>& targets,
                                             ModuleFilter filter) const;

    /// Current snapshot of one server. Throws Error{AgentUnreachable}.
    ServerSnapshot snapshot(const std::string& server_id) const;

    /// Provisions a resource on one server, e.g. a mail factory. Returns
    /// false when it already existed. Throws Error{ServiceUnavailable,
    /// ConflictingService, AgentUnreachable}.
    bool create_resource(const std::string& server_id, const std::string& name, Service service);

private:
    class ServerQueue;

    DeploymentManager(bool disconnected, std::vector<Target> targets);

    void require_connected() const;
    std::vector<std::string> expand(const std::vector<Target>& targets) const;
    ServerQueue& queue_for(const std::string& server_id);
    std::shared_ptr<ProgressObject> lifecycle(CommandType command, const std::vector<TargetModuleID>& ids);

    bool disconnected_;
    std::vector<Target> targets_;
    std::mutex queues_mu_;
    std::map<std::string, std::unique_ptr<ServerQueue>> queues_;
};

/// Serves a target list to managers (`depman://host:port/`).
class RegistryServer {
public:
    /// Throws Error{EndpointInUse}.
    RegistryServer(std::vector<Target> targets, const wire::Endpoint& endpoint);

    const wire::Endpoint& endpoint() const noexcept { return server_->endpoint(); }
    std::string uri() const { return "depman://" + endpoint().to_string() + "/"; }
    void stop() { server_->stop(); }

private:
    std::string handle(std::string_view payload) const;

    std::string targets_xml_;
    std::unique_ptr<wire::FrameServer> server_;
};

} // namespace depman
