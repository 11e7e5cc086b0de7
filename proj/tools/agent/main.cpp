#include <depman/agent.hpp>
#include <depman/error.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Per-server deployment agent", "depman-agent"};
    std::string config_path;
    std::string data_dir;
    app.add_option("-c,--config", config_path, "server.xml")->required()->check(CLI::ExistingFile);
    app.add_option("-d,--data", data_dir, "State directory (created if missing)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    std::unique_ptr<depman::Agent> agent;
    try {
        std::ifstream in(config_path, std::ios::binary);
        std::ostringstream text;
        text << in.rdbuf();
        agent = depman::Agent::run(depman::ServerConfig::parse_xml(text.str()), data_dir);
    } catch (const depman::Error& e) {
        std::cerr << "depman-agent: " << e.what() << '\n';
        return 1;
    }
    std::cout << "agent " << agent->id() << " listening on " << agent->endpoint().to_string() << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    agent->shutdown();
    std::cout << "agent " << agent->id() << " stopped" << std::endl;
    return 0;
}
