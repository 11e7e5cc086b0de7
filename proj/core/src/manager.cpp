#include "depman/manager.hpp"

#include "depman/error.hpp"
#include "json_codec.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <set>

namespace depman {

using detail::json;

// Targets

std::vector<Target> parse_targets_xml(std::string_view text) {
    auto bad = [](const std::string& what) { return Error(Errc::MalformedTargets, what); };
    DescriptorNode root;
    try {
        root = parse_xml(text);
    } catch (const Error& e) {
        throw bad(e.detail());
    }
    if (root.name != "targets") throw bad("root must be <targets>");

    std::vector<Target> out;
    std::set<std::string> ids;
    std::set<std::string> servers;
    for (const auto& n : root.children) {
        Target t;
        t.id = n.attribute_or("id", "");
        if (t.id.empty()) throw bad("<" + n.name + "> lacks an id");
        if (!ids.insert(t.id).second) throw bad("duplicate target id '" + t.id + "'");
        if (n.name == "server") {
            t.kind = Target::Kind::server;
            t.endpoint = n.attribute_or("endpoint", "");
            t.site = n.attribute_or("site", "");
            try {
                wire::Endpoint::parse(t.endpoint);
            } catch (const std::invalid_argument& e) {
                throw bad("server '" + t.id + "': " + e.what());
            }
            servers.insert(t.id);
        } else if (n.name == "group") {
            t.kind = Target::Kind::group;
            for (const auto& m : n.children) {
                if (m.name != "member" || !m.attribute("ref")) throw bad("group '" + t.id + "' has a malformed member");
                t.members.push_back(*m.attribute("ref"));
            }
        } else {
            throw bad("unknown element <" + n.name + ">");
        }
        out.push_back(std::move(t));
    }
    for (const auto& t : out) {
        for (const auto& m : t.members) {
            if (!servers.count(m)) throw bad("group '" + t.id + "' member '" + m + "' is not a server");
        }
    }
    return out;
}

std::string targets_to_xml(const std::vector<Target>& targets) {
    DescriptorNode root{"targets", {}, std::nullopt, {}};
    for (const auto& t : targets) {
        if (t.is_group()) {
            DescriptorNode g{"group", {{"id", t.id}}, std::nullopt, {}};
            for (const auto& m : t.members) g.children.push_back({"member", {{"ref", m}}, std::nullopt, {}});
            root.children.push_back(std::move(g));
        } else {
            root.children.push_back({"server", {{"id", t.id}, {"endpoint", t.endpoint}, {"site", t.site}}, std::nullopt, {}});
        }
    }
    return canonical_bytes(root);
}

std::string TargetModuleID::to_string() const {
    return (parent ? *parent + "/" : std::string{}) + unit_name + "@" + server_id;
}

TargetModuleID TargetModuleID::parse(std::string_view text) {
    auto at = text.rfind('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == text.size()) {
        throw std::invalid_argument("module id must look like unit@server, got '" + std::string(text) + "'");
    }
    TargetModuleID id;
    id.server_id = std::string(text.substr(at + 1));
    std::string_view unit = text.substr(0, at);
    if (auto slash = unit.find('/'); slash != std::string_view::npos) {
        if (slash == 0 || slash + 1 == unit.size()) throw std::invalid_argument("bad child module id '" + std::string(text) + "'");
        id.parent = std::string(unit.substr(0, slash));
        unit = unit.substr(slash + 1);
    }
    id.unit_name = std::string(unit);
    auto token = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
            return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
        });
    };
    if (!token(id.unit_name) || !token(id.server_id) || (id.parent && !token(*id.parent))) {
        throw std::invalid_argument("bad module id '" + std::string(text) + "'");
    }
    return id;
}

std::string_view to_string(CommandType c) noexcept {
    switch (c) {
    case CommandType::distribute: return "distribute";
    case CommandType::start: return "start";
    case CommandType::stop: return "stop";
    case CommandType::undeploy: return "undeploy";
    }
    return "?";
}

std::string_view to_string(StateType s) noexcept {
    switch (s) {
    case StateType::running: return "running";
    case StateType::completed: return "completed";
    case StateType::failed: return "failed";
    }
    return "?";
}

std::optional<ModuleFilter> parse_module_filter(std::string_view text) noexcept {
    if (text == "available") return ModuleFilter::available;
    if (text == "running") return ModuleFilter::running;
    if (text == "non-running") return ModuleFilter::non_running;
    return std::nullopt;
}

// ProgressObject

ProgressObject::ProgressObject(CommandType command) { status_.command = command; }

DeploymentStatus ProgressObject::status() const {
    std::lock_guard lock(mu_);
    return status_;
}

std::vector<TargetModuleID> ProgressObject::result_ids() const {
    std::lock_guard lock(mu_);
    return results_;
}

void ProgressObject::add_listener(Listener listener) {
    DeploymentStatus terminal;
    {
        std::lock_guard lock(mu_);
        if (!status_.terminal()) {
            listeners_.push_back(std::move(listener));
            return;
        }
        terminal = status_;
    }
    listener(terminal);
}

DeploymentStatus ProgressObject::wait() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return status_.terminal(); });
    return status_;
}

std::optional<DeploymentStatus> ProgressObject::wait_for(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return status_.terminal(); })) return std::nullopt;
    return status_;
}

void ProgressObject::report(std::string message) {
    std::vector<Listener> listeners;
    DeploymentStatus event;
    {
        std::lock_guard lock(mu_);
        if (status_.terminal()) return;
        status_.message = std::move(message);
        event = status_;
        listeners = listeners_;
    }
    for (auto& l : listeners) l(event);
}

void ProgressObject::finish(StateType state, std::string message, std::vector<TargetModuleID> results) {
    std::vector<Listener> listeners;
    DeploymentStatus terminal;
    {
        std::lock_guard lock(mu_);
        if (status_.terminal()) return;
        status_.state = state;
        status_.message = std::move(message);
        results_ = std::move(results);
        terminal = status_;
        listeners.swap(listeners_);
    }
    cv_.notify_all();
    for (auto& l : listeners) l(terminal);
}

// Per-server FIFO executor.

class DeploymentManager::ServerQueue {
public:
    ServerQueue() : worker_([this] { run(); }) {}
    ~ServerQueue() {
        {
            std::lock_guard lock(mu_);
            closing_ = true;
        }
        cv_.notify_all();
        worker_.join();
    }

    void post(std::function<void()> task) {
        {
            std::lock_guard lock(mu_);
            tasks_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

private:
    void run() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return closing_ || !tasks_.empty(); });
                if (tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop_front();
            }
            task();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> tasks_;
    bool closing_ = false;
    std::thread worker_;
};

namespace {

std::atomic<std::uint64_t> g_request_seq{0};

/// Sends one request to an agent. Transport failures become
/// Error{AgentUnreachable}; `{ok:false}` replies become Error with the
/// agent's code.
json agent_call(const Target& server, json request) {
    request["id"] = "m" + std::to_string(++g_request_seq);
    std::string raw;
    try {
        raw = wire::call(wire::Endpoint::parse(server.endpoint), request.dump());
    } catch (const Error& e) {
        throw Error(Errc::AgentUnreachable, server.id + " (" + server.endpoint + "): " + e.detail());
    } catch (const std::invalid_argument& e) {
        throw Error(Errc::AgentUnreachable, server.id + ": " + e.what());
    }
    json reply = json::parse(raw, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw Error(Errc::AgentUnreachable, server.id + ": malformed reply");
    if (reply.value("id", json()) != request["id"]) throw Error(Errc::AgentUnreachable, server.id + ": uncorrelated reply");
    if (!reply.value("ok", false)) {
        std::string code = reply.value("code", "InternalError");
        std::string message = reply.value("message", "");
        for (auto errc : {Errc::NotConfigured, Errc::NotInstalled, Errc::AlreadyInstalled, Errc::AlreadyRunning,
                          Errc::NotRunning, Errc::StillRunning, Errc::MissingResource, Errc::ServiceUnavailable,
                          Errc::ConflictingService, Errc::HasDependents, Errc::UnknownOp, Errc::MalformedRequest,
                          Errc::FrameTooLarge, Errc::UnknownService}) {
            if (to_string(errc) == code) throw Error(errc, message);
        }
        throw std::runtime_error(code + ": " + message);
    }
    return reply;
}

std::string describe(const std::exception& e) { return e.what(); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

/// Collects per-server outcomes of one operation and finishes the progress
/// object when the last server reports.
class Aggregate {
public:
    Aggregate(std::shared_ptr<ProgressObject> progress, std::size_t servers, bool results_only_on_success)
        : progress_(std::move(progress)), remaining_(servers), results_only_on_success_(results_only_on_success) {}

    void done(const std::string& server, bool ok, std::string message, std::vector<TargetModuleID> results) {
        progress_->report(server + ": " + message);
        bool last = false;
        {
            std::lock_guard lock(mu_);
            outcomes_[server] = {ok, std::move(message)};
            for (auto& r : results) results_.push_back(std::move(r));
            last = --remaining_ == 0;
        }
        if (last) finish();
    }

private:
    void finish() {
        bool all_ok = true;
        std::vector<std::string> failed;
        std::vector<std::string> parts;
        for (const auto& [server, outcome] : outcomes_) {
            all_ok = all_ok && outcome.first;
            parts.push_back(server + ": " + outcome.second);
            if (!outcome.first) failed.push_back(server);
        }
        std::sort(results_.begin(), results_.end());
        std::string message = all_ok ? join(parts, "; ") : "failed on " + join(failed, ", ") + "; " + join(parts, "; ");
        if (!all_ok && results_only_on_success_) results_.clear();
        progress_->finish(all_ok ? StateType::completed : StateType::failed, std::move(message), std::move(results_));
    }

    std::shared_ptr<ProgressObject> progress_;
    std::mutex mu_;
    std::size_t remaining_;
    bool results_only_on_success_;
    std::map<std::string, std::pair<bool, std::string>> outcomes_;
    std::vector<TargetModuleID> results_;
};

} // namespace

// DeploymentManager

DeploymentManager::DeploymentManager(bool disconnected, std::vector<Target> targets)
    : disconnected_(disconnected), targets_(std::move(targets)) {
    std::stable_sort(targets_.begin(), targets_.end(), [](const Target& a, const Target& b) {
        if (a.is_group() != b.is_group()) return !a.is_group();
        return a.id < b.id;
    });
}

DeploymentManager::~DeploymentManager() = default;

std::unique_ptr<DeploymentManager> DeploymentManager::connect(std::string_view uri) {
    if (uri == "depman:disconnected") {
        return std::unique_ptr<DeploymentManager>(new DeploymentManager(true, {}));
    }
    constexpr std::string_view scheme = "depman://";
    if (!uri.starts_with(scheme)) throw Error(Errc::MalformedUri, "'" + std::string(uri) + "'");
    std::string_view rest = uri.substr(scheme.size());
    std::string_view authority = rest.substr(0, rest.find('/'));
    wire::Endpoint ep;
    try {
        ep = wire::Endpoint::parse(authority);
    } catch (const std::invalid_argument& e) {
        throw Error(Errc::MalformedUri, "'" + std::string(uri) + "': " + e.what());
    }

    std::string raw;
    try {
        raw = wire::call(ep, json{{"op", "TARGETS"}, {"id", "connect"}}.dump());
    } catch (const Error& e) {
        throw Error(Errc::ConnectionRefused, e.detail());
    }
    json reply = json::parse(raw, nullptr, false);
    if (reply.is_discarded() || !reply.value("ok", false) || !reply.contains("targets")) {
        throw Error(Errc::ConnectionRefused, ep.to_string() + " is not a target registry");
    }
    return with_targets(parse_targets_xml(reply["targets"].get<std::string>()));
}

std::unique_ptr<DeploymentManager> DeploymentManager::with_targets(std::vector<Target> targets) {
    // Round-trip through the XML form for its validation.
    auto checked = parse_targets_xml(targets_to_xml(targets));
    return std::unique_ptr<DeploymentManager>(new DeploymentManager(false, std::move(checked)));
}

DeploymentConfiguration DeploymentManager::create_configuration(const DeployableUnit& unit) const {
    return depman::create_configuration(unit);
}

DeployedUnit DeploymentManager::generate_deployed_unit(const DeployableUnit& unit,
                                                       const DeploymentConfiguration& config) const {
    return depman::generate_deployed_unit(unit, config);
}

void DeploymentManager::require_connected() const {
    if (disconnected_) throw Error(Errc::Disconnected, "manager is in disconnected mode; only configuration is available");
}

std::vector<Target> DeploymentManager::targets() const {
    require_connected();
    return targets_;
}

const Target& DeploymentManager::target(std::string_view id) const {
    require_connected();
    for (const auto& t : targets_) {
        if (t.id == id) return t;
    }
    throw Error(Errc::UnknownTarget, "'" + std::string(id) + "'");
}

std::vector<std::string> DeploymentManager::expand(const std::vector<Target>& targets) const {
    std::vector<std::string> servers;
    for (const auto& t : targets) {
        const Target& known = target(t.id);
        if (known.is_group()) {
            servers.insert(servers.end(), known.members.begin(), known.members.end());
        } else {
            servers.push_back(known.id);
        }
    }
    std::sort(servers.begin(), servers.end());
    servers.erase(std::unique(servers.begin(), servers.end()), servers.end());
    return servers;
}

DeploymentManager::ServerQueue& DeploymentManager::queue_for(const std::string& server_id) {
    std::lock_guard lock(queues_mu_);
    auto& q = queues_[server_id];
    if (!q) q = std::make_unique<ServerQueue>();
    return *q;
}

ServerSnapshot DeploymentManager::snapshot(const std::string& server_id) const {
    const Target& server = target(server_id);
    if (server.is_group()) throw Error(Errc::UnknownTarget, "'" + server_id + "' is a group");
    return detail::snapshot_from_json(agent_call(server, {{"op", "SNAPSHOT"}}).at("snapshot"));
}

bool DeploymentManager::create_resource(const std::string& server_id, const std::string& name, Service service) {
    const Target& server = target(server_id);
    if (server.is_group()) throw Error(Errc::UnknownTarget, "'" + server_id + "' is a group");
    // Runs through the server's queue so it orders with lifecycle operations.
    auto result = std::make_shared<std::promise<bool>>();
    auto done = result->get_future();
    queue_for(server_id).post([server, name, service, result] {
        try {
            json reply = agent_call(server, {{"op", "CREATE_RESOURCE"}, {"name", name}, {"service", std::string(to_string(service))}});
            result->set_value(reply.value("created", false));
        } catch (...) {
            result->set_exception(std::current_exception());
        }
    });
    return done.get();
}

std::shared_ptr<ProgressObject> DeploymentManager::distribute(const std::vector<Target>& targets,
                                                              const DeployedUnit& unit, bool check_deps) {
    require_connected();
    auto servers = expand(targets);
    auto progress = std::make_shared<ProgressObject>(CommandType::distribute);
    if (servers.empty()) {
        progress->finish(StateType::failed, "no target servers", {});
        return progress;
    }
    auto archive = std::make_shared<const std::string>(wire::base64_encode(write_unit(unit)));
    auto deployed = std::make_shared<const DeployedUnit>(unit);
    auto aggregate = std::make_shared<Aggregate>(progress, servers.size(), true);

    for (const auto& server_id : servers) {
        const Target server = target(server_id);
        queue_for(server_id).post([server, archive, deployed, aggregate, check_deps] {
            try {
                if (check_deps) {
                    auto snap = detail::snapshot_from_json(agent_call(server, {{"op", "SNAPSHOT"}}).at("snapshot"));
                    auto findings = check_against_target(deployed->base, snap);
                    if (!findings.empty()) {
                        std::vector<std::string> parts;
                        for (const auto& f : findings) {
                            parts.push_back(f.unit + " requires " + std::string(to_string(f.kind)) + " " + f.detail);
                        }
                        aggregate->done(server.id, false, "UnsatisfiedDependency: " + join(parts, ", "), {});
                        return;
                    }
                }
                json reply = agent_call(server, {{"op", "INSTALL"}, {"archive", *archive}});
                std::vector<TargetModuleID> ids;
                std::string unit_name = reply.at("unit").get<std::string>();
                ids.push_back({unit_name, server.id, std::nullopt});
                for (const auto& child : reply.at("children")) ids.push_back({child.get<std::string>(), server.id, unit_name});
                aggregate->done(server.id, true, "installed " + unit_name, std::move(ids));
            } catch (const std::exception& e) {
                aggregate->done(server.id, false, describe(e), {});
            }
        });
    }
    return progress;
}

std::shared_ptr<ProgressObject> DeploymentManager::lifecycle(CommandType command, const std::vector<TargetModuleID>& ids) {
    require_connected();
    std::map<std::string, std::vector<TargetModuleID>> by_server;
    for (const auto& id : ids) {
        const Target& t = target(id.server_id);
        if (t.is_group()) throw Error(Errc::UnknownTarget, "module ids name servers, not groups: '" + id.to_string() + "'");
        by_server[id.server_id].push_back(id);
    }
    auto progress = std::make_shared<ProgressObject>(command);
    if (by_server.empty()) {
        progress->finish(StateType::failed, "no modules given", {});
        return progress;
    }
    const bool results_only_on_success = command == CommandType::start;
    auto aggregate = std::make_shared<Aggregate>(progress, by_server.size(), results_only_on_success);
    const char* op = command == CommandType::start ? "START" : command == CommandType::stop ? "STOP" : "UNINSTALL";
    std::string verb = command == CommandType::start ? "started" : command == CommandType::stop ? "stopped" : "undeployed";

    for (auto& [server_id, group] : by_server) {
        const Target server = target(server_id);
        queue_for(server_id).post([server, group, aggregate, op, verb] {
            bool ok = true;
            std::vector<std::string> parts;
            std::vector<TargetModuleID> done;
            for (const auto& id : group) {
                try {
                    if (!id.is_root()) throw Error(Errc::NotRootModule, id.to_string());
                    agent_call(server, {{"op", op}, {"unit", id.unit_name}});
                    parts.push_back(verb + " " + id.unit_name);
                    done.push_back(id);
                } catch (const std::exception& e) {
                    ok = false;
                    parts.push_back(id.unit_name + " " + describe(e));
                }
            }
            aggregate->done(server.id, ok, join(parts, ", "), std::move(done));
        });
    }
    return progress;
}

std::shared_ptr<ProgressObject> DeploymentManager::start(const std::vector<TargetModuleID>& ids) {
    return lifecycle(CommandType::start, ids);
}

std::shared_ptr<ProgressObject> DeploymentManager::stop(const std::vector<TargetModuleID>& ids) {
    return lifecycle(CommandType::stop, ids);
}

std::shared_ptr<ProgressObject> DeploymentManager::undeploy(const std::vector<TargetModuleID>& ids) {
    return lifecycle(CommandType::undeploy, ids);
}

std::vector<TargetModuleID> DeploymentManager::list_modules(std::optional<ModuleKind> kind,
                                                            const std::vector<Target>& targets,
                                                            ModuleFilter filter) const {
    require_connected();
    std::vector<TargetModuleID> out;
    for (const auto& server_id : expand(targets)) {
        json reply = agent_call(target(server_id), {{"op", "LIST"}});
        for (const auto& m : reply.at("modules")) {
            if (kind && m.at("kind").get<std::string>() != to_string(*kind)) continue;
            bool running = m.at("state").get<std::string>() == "running";
            if ((filter == ModuleFilter::running && !running) || (filter == ModuleFilter::non_running && running)) continue;
            out.push_back({m.at("name").get<std::string>(), server_id, std::nullopt});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// RegistryServer

RegistryServer::RegistryServer(std::vector<Target> targets, const wire::Endpoint& endpoint)
    : targets_xml_(targets_to_xml(parse_targets_xml(targets_to_xml(targets)))) {
    server_ = std::make_unique<wire::FrameServer>(
        endpoint, [this](std::string_view payload) { return handle(payload); },
        [](const std::exception& e) { return detail::error_reply(nullptr, "FrameTooLarge", e.what()).dump(); });
}

std::string RegistryServer::handle(std::string_view payload) const {
    json request = json::parse(payload, nullptr, false);
    if (request.is_discarded() || !request.is_object() || !request.contains("id") || !request.contains("op") ||
        !request["op"].is_string()) {
        json id = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
        return detail::error_reply(id, "MalformedRequest", "request needs string 'op' and 'id'").dump();
    }
    const std::string op = request["op"].get<std::string>();
    if (op == "TARGETS") return json{{"id", request["id"]}, {"ok", true}, {"targets", targets_xml_}}.dump();
    if (op == "HELLO") return json{{"id", request["id"]}, {"ok", true}, {"role", "registry"}}.dump();
    return detail::error_reply(request["id"], "UnknownOp", op).dump();
}

} // namespace depman
