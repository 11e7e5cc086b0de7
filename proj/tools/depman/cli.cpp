#include "cli.hpp"

#include <depman/config.hpp>
#include <depman/error.hpp>
#include <depman/manager.hpp>
#include <depman/unit.hpp>

#include <CLI11.hpp>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace depman::cli {

namespace {

namespace fs = std::filesystem;

/// Thrown for bad arguments that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::pair<std::string, std::string> split_binding(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
        throw UsageError("binding must look like ref=resource, got '" + text + "'");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

/// Collects listener events from worker threads so the command thread can
/// print them in order.
class EventPump {
public:
    void push(const DeploymentStatus& s) {
        {
            std::lock_guard lock(mu_);
            events_.push_back(s);
        }
        cv_.notify_one();
    }

    /// Prints events until the terminal one; returns it.
    DeploymentStatus drain(std::ostream& out) {
        for (;;) {
            DeploymentStatus s;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return !events_.empty(); });
                s = std::move(events_.front());
                events_.pop_front();
            }
            out << "STATUS " << to_string(s.command) << ' ' << to_string(s.state) << ' ' << s.message << '\n';
            if (s.terminal()) return s;
        }
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<DeploymentStatus> events_;
};

int follow(const std::shared_ptr<ProgressObject>& progress, std::ostream& out) {
    EventPump pump;
    progress->add_listener([&pump](const DeploymentStatus& s) { pump.push(s); });
    DeploymentStatus terminal = pump.drain(out);
    for (const auto& id : progress->result_ids()) out << "MODULE " << id.to_string() << '\n';
    return terminal.state == StateType::completed ? kSuccess : kOperationFailed;
}

struct Options {
    std::string manager;

    std::string unit_path;
    std::vector<std::string> bindings;
    bool interactive = false;
    std::string out_path;
    std::string load_config;
    std::string save_config;

    std::string pack_dir;

    std::string deployed_path;
    std::vector<std::string> target_ids;
    bool no_dep_check = false;

    std::vector<std::string> module_ids;

    std::string kind;
    std::string filter = "available";

    std::string server_id;
    std::string resource_name;
    std::string service;
};

std::unique_ptr<DeploymentManager> connect_manager(const Options& opt, const std::optional<std::string>& env) {
    std::string uri = !opt.manager.empty() ? opt.manager : env.value_or("");
    if (uri.empty()) throw UsageError("no manager given; pass --manager or set DEPMAN_MANAGER");
    try {
        return DeploymentManager::connect(uri);
    } catch (const Error& e) {
        if (e.code() == Errc::MalformedUri) throw UsageError(e.what());
        throw;
    }
}

std::vector<Target> resolve_targets(const DeploymentManager& mgr, const std::vector<std::string>& ids) {
    std::vector<Target> out;
    for (const auto& id : ids) {
        try {
            out.push_back(mgr.target(id));
        } catch (const Error& e) {
            if (e.code() == Errc::UnknownTarget) throw UsageError(e.what());
            throw;
        }
    }
    return out;
}

std::vector<TargetModuleID> parse_module_ids(const DeploymentManager& mgr, const std::vector<std::string>& texts) {
    std::vector<TargetModuleID> out;
    for (const auto& t : texts) {
        TargetModuleID id;
        try {
            id = TargetModuleID::parse(t);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const Target* server = nullptr;
        try {
            server = &mgr.target(id.server_id);
        } catch (const Error& e) {
            if (e.code() == Errc::UnknownTarget) throw UsageError(e.what());
            throw;
        }
        if (server->is_group()) throw UsageError("module id '" + t + "' names a group, not a server");
        out.push_back(std::move(id));
    }
    return out;
}

int cmd_configure(const Options& opt, std::istream& in, std::ostream& out, std::ostream& err) {
    std::vector<std::pair<std::string, std::string>> bindings;
    for (const auto& b : opt.bindings) bindings.push_back(split_binding(b));

    DeployableUnit unit = open_unit(read_file(opt.unit_path));
    DeploymentConfiguration config = opt.load_config.empty() ? create_configuration(unit)
                                                             : restore_configuration(read_file(opt.load_config));
    for (const auto& [ref, res] : bindings) config = depman::bind(std::move(config), ref, res);

    if (opt.interactive) {
        for (const auto& ref : unbound_references(config)) {
            out << "bind " << ref << ": " << std::flush;
            std::string line;
            if (!std::getline(in, line)) break;
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (line.empty()) continue;
            config = depman::bind(std::move(config), ref, line);
        }
        out << '\n';
    }

    if (!opt.save_config.empty()) {
        write_file(opt.save_config, save_configuration(config));
        out << "saved configuration to " << opt.save_config << '\n';
    }

    auto missing = unbound_references(config);
    if (!missing.empty()) {
        for (const auto& m : missing) err << "unbound reference: " << m << '\n';
        return kOperationFailed;
    }
    if (opt.out_path.empty()) {
        if (opt.save_config.empty()) throw UsageError("configure needs --out (or --save-config)");
        return kSuccess;
    }
    DeployedUnit deployed = generate_deployed_unit(unit, config);
    write_file(opt.out_path, write_unit(deployed));
    out << "wrote " << opt.out_path << '\n';
    for (const auto& e : deployed.manifest.entries) out << "stub:" << e.component << ':' << e.digest << '\n';
    return kSuccess;
}

int cmd_pack(const Options& opt, std::ostream& out, std::ostream& err) {
    zip::Entries entries;
    fs::path root(opt.pack_dir);
    if (!fs::is_directory(root)) throw std::runtime_error("'" + opt.pack_dir + "' is not a directory");
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        entries[fs::relative(e.path(), root).generic_string()] = read_file(e.path().string());
    }
    DeployableUnit unit = open_unit_entries(std::move(entries));
    auto violations = validate_unit(unit);
    for (const auto& v : violations) err << "violation: " << to_string(v.code) << " at " << v.where << '\n';
    for (const auto& w : dependency_warnings(unit.deps)) err << "warning: " << w << '\n';
    if (!violations.empty()) return kOperationFailed;
    write_file(opt.out_path, write_unit(unit));
    out << "wrote " << opt.out_path << " (" << unit.name << ", " << to_string(unit.kind) << ")\n";
    return kSuccess;
}

int cmd_targets(DeploymentManager& mgr, std::ostream& out) {
    for (const auto& t : mgr.targets()) {
        if (t.is_group()) {
            out << "GROUP " << t.id << ' ';
            for (std::size_t i = 0; i < t.members.size(); ++i) out << (i ? "," : "") << t.members[i];
            out << '\n';
        } else {
            out << "SERVER " << t.id << ' ' << t.endpoint << ' ' << t.site << '\n';
        }
    }
    return kSuccess;
}

int cmd_list(DeploymentManager& mgr, const Options& opt, std::ostream& out) {
    std::optional<ModuleKind> kind;
    if (!opt.kind.empty()) {
        kind = parse_module_kind(opt.kind);
        if (!kind) throw UsageError("unknown kind '" + opt.kind + "'");
    }
    auto filter = parse_module_filter(opt.filter);
    if (!filter) throw UsageError("unknown filter '" + opt.filter + "'");
    std::vector<Target> targets = opt.target_ids.empty() ? mgr.targets() : resolve_targets(mgr, opt.target_ids);
    for (const auto& id : mgr.list_modules(kind, targets, *filter)) out << "MODULE " << id.to_string() << '\n';
    return kSuccess;
}

} // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err,
        std::optional<std::string> manager_env) {
    CLI::App app{"Deployment manager for archive-based server modules", "depman"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("-m,--manager", opt.manager, "Manager URI (default $DEPMAN_MANAGER)");

    auto* configure = app.add_subcommand("configure", "Bind references and produce a deployed unit");
    configure->add_option("unit", opt.unit_path, "Unit archive")->required();
    configure->add_option("-b,--bind", opt.bindings, "Binding ref=resource (repeatable)");
    configure->add_flag("-i,--interactive", opt.interactive, "Prompt for each unbound reference");
    configure->add_option("-o,--out", opt.out_path, "Deployed unit output path");
    configure->add_option("--load-config", opt.load_config, "Start from a saved platform configuration");
    configure->add_option("--save-config", opt.save_config, "Save the platform configuration, even if incomplete");

    auto* pack = app.add_subcommand("pack", "Archive a unit directory");
    pack->add_option("dir", opt.pack_dir, "Directory holding META-INF/unit.xml")->required();
    pack->add_option("-o,--out", opt.out_path, "Output archive")->required();

    auto* targets = app.add_subcommand("targets", "List servers and groups");

    auto* distribute = app.add_subcommand("distribute", "Install a deployed unit on targets");
    distribute->add_option("unit", opt.deployed_path, "Deployed unit archive")->required();
    distribute->add_option("-t,--target", opt.target_ids, "Target id (repeatable)")->required();
    distribute->add_flag("--no-dep-check", opt.no_dep_check, "Skip dependency checks against the targets");

    auto* start = app.add_subcommand("start", "Start modules");
    auto* stop = app.add_subcommand("stop", "Stop modules");
    auto* undeploy = app.add_subcommand("undeploy", "Remove stopped modules");
    for (auto* sub : {start, stop, undeploy}) {
        sub->add_option("modules", opt.module_ids, "Module ids, unit@server")->required();
    }

    auto* list = app.add_subcommand("list", "List modules");
    list->add_option("-k,--kind", opt.kind, "application|web|component|adapter");
    list->add_option("-f,--filter", opt.filter, "available|running|non-running");
    list->add_option("-t,--target", opt.target_ids, "Target id (repeatable; default all)");

    auto* resource = app.add_subcommand("resource", "Create a resource on a server");
    resource->add_option("server", opt.server_id, "Server id")->required();
    resource->add_option("name", opt.resource_name, "Resource name")->required();
    resource->add_option("service", opt.service, "Owning service, e.g. mail")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? kSuccess : kUsage;
    }

    try {
        if (configure->parsed()) return cmd_configure(opt, in, out, err);
        if (pack->parsed()) return cmd_pack(opt, out, err);

        std::unique_ptr<DeploymentManager> mgr;
        try {
            mgr = connect_manager(opt, manager_env);
        } catch (const Error& e) {
            err << "error: " << e.what() << '\n';
            return kConnection;
        }

        if (targets->parsed()) return cmd_targets(*mgr, out);
        if (list->parsed()) return cmd_list(*mgr, opt, out);
        if (distribute->parsed()) {
            auto target_list = resolve_targets(*mgr, opt.target_ids);
            DeployedUnit unit = open_deployed_unit(read_file(opt.deployed_path));
            return follow(mgr->distribute(target_list, unit, !opt.no_dep_check), out);
        }
        if (start->parsed()) return follow(mgr->start(parse_module_ids(*mgr, opt.module_ids)), out);
        if (stop->parsed()) return follow(mgr->stop(parse_module_ids(*mgr, opt.module_ids)), out);
        if (undeploy->parsed()) return follow(mgr->undeploy(parse_module_ids(*mgr, opt.module_ids)), out);
        if (resource->parsed()) {
            auto service = parse_service(opt.service);
            if (!service) throw UsageError("unknown service '" + opt.service + "'");
            resolve_targets(*mgr, {opt.server_id});
            bool created = mgr->create_resource(opt.server_id, opt.resource_name, *service);
            out << (created ? "created " : "exists ") << opt.resource_name << '@' << opt.service << " on "
                << opt.server_id << '\n';
            return kSuccess;
        }
    } catch (const UsageError& e) {
        err << "usage: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == Errc::Disconnected ? kConnection : kOperationFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kOperationFailed;
    }
    return kUsage;
}

} // namespace depman::cli
