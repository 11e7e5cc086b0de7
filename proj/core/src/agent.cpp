#include "depman/agent.hpp"

#include "depman/depres.hpp"
#include "depman/error.hpp"
#include "json_codec.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

namespace depman {

using detail::json;

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(Errc::MalformedServerConfig, what); }

bool is_token(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    });
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view bytes) {
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, p);
}

const ConfigNode* config_root(const DeploymentConfiguration& config, const std::string& deployable) {
    for (const auto& r : config.roots) {
        if (r.deployable == deployable) return &r;
    }
    return nullptr;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& i : items) out += (out.empty() ? "" : ", ") + i;
    return out;
}

} // namespace

// ServerConfig

void ServerConfig::validate() const {
    if (!is_token(id)) bad_config("server id '" + id + "' is not a token");
    if (!is_token(site)) bad_config("server '" + id + "' needs a site");
    try {
        wire::Endpoint::parse(endpoint);
    } catch (const std::invalid_argument& e) {
        bad_config(e.what());
    }
    for (auto s : services) {
        if (is_mandatory(s)) bad_config("service '" + std::string(to_string(s)) + "' is mandatory and cannot be configured");
    }
    for (const auto& [name, s] : resources) {
        if (!is_mandatory(s) && !services.count(s)) {
            bad_config("resource '" + name + "' lives under unconfigured service '" + std::string(to_string(s)) + "'");
        }
    }
    if (registry_endpoint.empty()) bad_config("registry endpoint must be 'self' or a server id");
    if (registry_endpoint != "self" && registry_site.empty()) bad_config("remote registry needs the site of its server");
}

ServerConfig ServerConfig::parse_xml(std::string_view text) {
    DescriptorNode root;
    try {
        root = depman::parse_xml(text);
    } catch (const Error& e) {
        bad_config(e.detail());
    }
    if (root.name != "server") bad_config("root must be <server>");
    ServerConfig c;
    c.id = root.attribute_or("id", "");
    c.endpoint = root.attribute_or("endpoint", c.endpoint);
    c.site = root.attribute_or("site", "");
    auto service_of = [](const DescriptorNode& n, std::string_view key) {
        auto s = parse_service(n.attribute_or(key, ""));
        if (!s) bad_config("unknown service '" + n.attribute_or(key, "") + "'");
        return *s;
    };
    for (const auto& n : root.children) {
        if (n.name == "service") {
            c.services.insert(service_of(n, "name"));
        } else if (n.name == "registry") {
            c.registry_endpoint = n.attribute_or("server", "self");
            c.registry_site = n.attribute_or("site", "");
        } else if (n.name == "resource") {
            std::string name = n.attribute_or("name", "");
            if (name.empty()) bad_config("<resource> lacks a name");
            c.resources[name] = service_of(n, "service");
        } else {
            bad_config("unknown element <" + n.name + ">");
        }
    }
    c.validate();
    return c;
}

std::string ServerConfig::to_xml() const {
    DescriptorNode root{"server", {{"id", id}, {"endpoint", endpoint}, {"site", site}}, std::nullopt, {}};
    for (auto s : services) root.children.push_back({"service", {{"name", std::string(to_string(s))}}, std::nullopt, {}});
    if (registry_endpoint != "self") {
        root.children.push_back({"registry", {{"server", registry_endpoint}, {"site", registry_site}}, std::nullopt, {}});
    }
    for (const auto& [name, s] : resources) {
        root.children.push_back({"resource", {{"name", name}, {"service", std::string(to_string(s))}}, std::nullopt, {}});
    }
    return canonical_bytes(root);
}

// AgentState

AgentState::AgentState(const ServerConfig& config) : config_(config), resources_(config.resources) {
    config_.validate();
    services_.insert(std::begin(kMandatoryServices), std::end(kMandatoryServices));
    services_.insert(config.services.begin(), config.services.end());
}

AgentState::InstallResult AgentState::install(std::string_view archive) {
    DeployedUnit unit = open_deployed_unit(archive);
    if (modules_.count(unit.name())) throw Error(Errc::AlreadyInstalled, unit.name());
    InstallResult result{unit.name(), unit.base.kind, {}};
    for (const auto& child : unit.base.children) result.children.push_back(child.name);
    std::string name = unit.name();
    modules_.emplace(name, Module{std::move(unit), std::string(archive), ModuleState::installed});
    events_.push_back("install " + name);
    return result;
}

void AgentState::resolve(const DeployedUnit& unit, const DeployableUnit& deployable) const {
    if (const ConfigNode* root = config_root(unit.config, deployable.name)) {
        for (const auto& n : root->children) {
            if (n.binding && !resources_.count(*n.binding)) throw Error(Errc::MissingResource, *n.binding);
        }
    }
    for (auto s : deployable.deps.requires_service) {
        if (!services_.count(s)) throw Error(Errc::ServiceUnavailable, std::string(to_string(s)));
    }
    for (const auto& r : deployable.deps.requires_resource) {
        if (!services_.count(r.service)) throw Error(Errc::ServiceUnavailable, std::string(to_string(r.service)));
        auto it = resources_.find(r.resource);
        if (it == resources_.end() || it->second != r.service) throw Error(Errc::MissingResource, r.resource);
    }
}

std::vector<std::string> AgentState::child_order(const DeployableUnit& unit) const {
    return install_order(build_graph(unit.children));
}

void AgentState::start(const std::string& name) {
    auto it = modules_.find(name);
    if (it == modules_.end()) throw Error(Errc::NotInstalled, name);
    Module& m = it->second;
    if (m.state == ModuleState::running) throw Error(Errc::AlreadyRunning, name);

    const DeployableUnit& base = m.unit.base;
    resolve(m.unit, base);
    std::vector<std::string> started;
    for (const auto& child_name : child_order(base)) {
        auto child = std::find_if(base.children.begin(), base.children.end(),
                                  [&](const DeployableUnit& c) { return c.name == child_name; });
        try {
            resolve(m.unit, *child);
        } catch (const Error&) {
            for (auto r = started.rbegin(); r != started.rend(); ++r) events_.push_back("stop " + *r);
            throw;
        }
        events_.push_back("start " + child_name);
        started.push_back(child_name);
    }
    events_.push_back("start " + name);
    m.state = ModuleState::running;
}

void AgentState::stop(const std::string& name) {
    auto it = modules_.find(name);
    if (it == modules_.end()) throw Error(Errc::NotInstalled, name);
    Module& m = it->second;
    if (m.state != ModuleState::running) throw Error(Errc::NotRunning, name);
    events_.push_back("stop " + name);
    auto order = child_order(m.unit.base);
    for (auto r = order.rbegin(); r != order.rend(); ++r) events_.push_back("stop " + *r);
    m.state = ModuleState::installed;
}

void AgentState::uninstall(const std::string& name) {
    auto it = modules_.find(name);
    if (it == modules_.end()) throw Error(Errc::NotInstalled, name);
    if (it->second.state == ModuleState::running) throw Error(Errc::StillRunning, name);

    std::set<std::string> provided{name};
    for (const auto& child : it->second.unit.base.children) provided.insert(child.name);
    std::vector<std::string> dependents;
    for (const auto& [other, m] : modules_) {
        if (other == name) continue;
        auto needs = [&](const DeployableUnit& u) {
            return std::any_of(u.deps.requires_unit.begin(), u.deps.requires_unit.end(),
                               [&](const std::string& r) { return provided.count(r) > 0; });
        };
        bool depends = needs(m.unit.base) || std::any_of(m.unit.base.children.begin(), m.unit.base.children.end(), needs);
        if (depends) dependents.push_back(other);
    }
    if (!dependents.empty()) throw Error(Errc::HasDependents, "[" + join(dependents) + "]");
    modules_.erase(it);
    events_.push_back("uninstall " + name);
}

bool AgentState::create_resource(const std::string& name, Service service) {
    if (name.empty()) throw Error(Errc::MalformedRequest, "resource name is empty");
    if (!services_.count(service)) throw Error(Errc::ServiceUnavailable, std::string(to_string(service)));
    auto it = resources_.find(name);
    if (it != resources_.end()) {
        if (it->second != service) {
            throw Error(Errc::ConflictingService,
                        name + " already exists under " + std::string(to_string(it->second)));
        }
        return false;
    }
    resources_.emplace(name, service);
    return true;
}

ServerSnapshot AgentState::snapshot() const {
    ServerSnapshot s;
    s.id = config_.id;
    s.site = config_.site;
    s.services = services_;
    s.resources = resources_;
    s.registry_endpoint = config_.registry_endpoint;
    s.registry_site = config_.registry_endpoint == "self" ? config_.site : config_.registry_site;
    for (const auto& [name, m] : modules_) {
        InstalledModule im;
        im.kind = m.unit.base.kind;
        im.state = m.state;
        im.digest_count = m.unit.manifest.entries.size();
        for (const auto& c : m.unit.base.children) im.children.push_back(c.name);
        s.installed.emplace(name, std::move(im));
    }
    return s;
}

std::string AgentState::state_json() const {
    json resources = json::object();
    for (const auto& [name, s] : resources_) resources[name] = std::string(to_string(s));
    json installed = json::object();
    for (const auto& [name, m] : modules_) {
        installed[name] = {{"kind", std::string(to_string(m.unit.base.kind))}, {"state", std::string(to_string(m.state))}};
    }
    json doc = {{"id", config_.id},
                {"site", config_.site},
                {"services", detail::services_to_json(services_)},
                {"registry_endpoint", config_.registry_endpoint},
                {"registry_site", config_.registry_site},
                {"resources", resources},
                {"installed", installed}};
    return doc.dump(2) + "\n";
}

void AgentState::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir / "modules");
    for (const auto& entry : std::filesystem::directory_iterator(dir / "modules")) {
        auto stem = entry.path().stem().string();
        if (entry.path().extension() == ".unit" && !modules_.count(stem)) std::filesystem::remove(entry.path());
    }
    for (const auto& [name, m] : modules_) write_file(dir / "modules" / (name + ".unit"), m.archive);
    write_file(dir / "state.json", state_json());
}

void AgentState::load(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "state.json")) return;
    json doc = json::parse(read_file(dir / "state.json"));
    if (doc.at("id").get<std::string>() != config_.id) {
        bad_config("state.json belongs to server '" + doc.at("id").get<std::string>() + "'");
    }
    config_.site = doc.at("site").get<std::string>();
    config_.registry_endpoint = doc.at("registry_endpoint").get<std::string>();
    config_.registry_site = doc.value("registry_site", std::string{});
    services_.clear();
    config_.services.clear();
    for (const auto& s : doc.at("services")) {
        Service svc = detail::service_from_json(s);
        services_.insert(svc);
        if (!is_mandatory(svc)) config_.services.insert(svc);
    }
    services_.insert(std::begin(kMandatoryServices), std::end(kMandatoryServices));
    resources_.clear();
    for (const auto& [name, s] : doc.at("resources").items()) resources_[name] = detail::service_from_json(s);
    modules_.clear();
    for (const auto& [name, rec] : doc.at("installed").items()) {
        std::string archive = read_file(dir / "modules" / (name + ".unit"));
        DeployedUnit unit = open_deployed_unit(archive);
        auto state = parse_module_state(rec.at("state").get<std::string>());
        if (unit.name() != name || !state || to_string(unit.base.kind) != rec.at("kind").get<std::string>()) {
            bad_config("state.json record for '" + name + "' does not match its archive");
        }
        modules_.emplace(name, Module{std::move(unit), std::move(archive), *state});
    }
}

// Agent

Agent::Agent(ServerConfig config, std::filesystem::path data_dir)
    : config_(std::move(config)), data_dir_(std::move(data_dir)), state_(config_) {}

std::unique_ptr<Agent> Agent::run(ServerConfig config, std::filesystem::path data_dir) {
    config.validate();
    std::unique_ptr<Agent> agent(new Agent(config, std::move(data_dir)));
    if (!agent->data_dir_.empty()) agent->state_.load(agent->data_dir_);
    wire::Endpoint ep;
    try {
        ep = wire::Endpoint::parse(config.endpoint);
    } catch (const std::invalid_argument& e) {
        throw Error(Errc::MalformedServerConfig, e.what());
    }
    Agent* self = agent.get();
    agent->server_ = std::make_unique<wire::FrameServer>(
        ep, [self](std::string_view payload) { return self->handle_request(payload); },
        [](const std::exception& e) {
            const auto* err = dynamic_cast<const Error*>(&e);
            std::string code = err ? std::string(to_string(err->code())) : "InternalError";
            return detail::error_reply(nullptr, code, err ? err->detail() : e.what()).dump();
        });
    agent->config_.endpoint = agent->server_->endpoint().to_string();
    return agent;
}

Agent::~Agent() {
    try {
        shutdown();
    } catch (...) {
    }
}

const wire::Endpoint& Agent::endpoint() const { return server_->endpoint(); }

void Agent::shutdown() {
    if (shut_down_) return;
    shut_down_ = true;
    if (server_) server_->stop();
    std::unique_lock lock(mu_);
    if (!data_dir_.empty()) state_.save(data_dir_);
}

ServerSnapshot Agent::snapshot() const {
    std::shared_lock lock(mu_);
    return state_.snapshot();
}

bool Agent::create_resource(const std::string& name, Service service) {
    std::unique_lock lock(mu_);
    return state_.create_resource(name, service);
}

std::vector<std::string> Agent::event_log() const {
    std::shared_lock lock(mu_);
    return state_.events();
}

std::string Agent::handle_request(std::string_view payload) {
    json request;
    try {
        request = json::parse(payload);
    } catch (const json::exception& e) {
        return detail::error_reply(nullptr, "MalformedRequest", e.what()).dump();
    }
    if (!request.is_object() || !request.contains("id") || !request["op"].is_string()) {
        json id = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
        return detail::error_reply(id, "MalformedRequest", "request needs string 'op' and 'id'").dump();
    }
    const json id = request["id"];
    const std::string op = request["op"].get<std::string>();
    auto field = [&](const char* key) -> std::string {
        auto it = request.find(key);
        if (it == request.end() || !it->is_string()) throw Error(Errc::MalformedRequest, std::string("missing field '") + key + "'");
        return it->get<std::string>();
    };

    try {
        json reply = {{"id", id}, {"ok", true}};
        if (op == "HELLO") {
            std::shared_lock lock(mu_);
            auto snap = state_.snapshot();
            reply["server_id"] = snap.id;
            reply["site"] = snap.site;
            reply["services"] = detail::services_to_json(snap.services);
        } else if (op == "SNAPSHOT") {
            std::shared_lock lock(mu_);
            reply["snapshot"] = detail::snapshot_to_json(state_.snapshot());
        } else if (op == "LIST") {
            std::shared_lock lock(mu_);
            auto snap = state_.snapshot();
            json modules = json::array();
            for (const auto& [name, m] : snap.installed) {
                modules.push_back({{"name", name},
                                   {"kind", std::string(to_string(m.kind))},
                                   {"state", std::string(to_string(m.state))},
                                   {"children", m.children}});
            }
            reply["modules"] = modules;
        } else if (op == "INSTALL") {
            std::string archive;
            try {
                archive = wire::base64_decode(field("archive"));
            } catch (const std::invalid_argument& e) {
                throw Error(Errc::MalformedRequest, e.what());
            }
            std::unique_lock lock(mu_);
            auto result = state_.install(archive);
            reply["unit"] = result.unit;
            reply["kind"] = std::string(to_string(result.kind));
            reply["children"] = result.children;
        } else if (op == "START") {
            std::string unit = field("unit");
            std::unique_lock lock(mu_);
            state_.start(unit);
        } else if (op == "STOP") {
            std::string unit = field("unit");
            std::unique_lock lock(mu_);
            state_.stop(unit);
        } else if (op == "UNINSTALL") {
            std::string unit = field("unit");
            std::unique_lock lock(mu_);
            state_.uninstall(unit);
        } else if (op == "CREATE_RESOURCE") {
            std::string name = field("name");
            auto service = parse_service(field("service"));
            if (!service) throw Error(Errc::UnknownService, field("service"));
            std::unique_lock lock(mu_);
            reply["created"] = state_.create_resource(name, *service);
        } else {
            return detail::error_reply(id, "UnknownOp", op).dump();
        }
        return reply.dump();
    } catch (const Error& e) {
        return detail::error_reply(id, to_string(e.code()), e.detail()).dump();
    } catch (const std::exception& e) {
        return detail::error_reply(id, "InternalError", e.what()).dump();
    }
}

} // namespace depman
