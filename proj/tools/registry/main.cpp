#include <depman/error.hpp>
#include <depman/manager.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Serves a target list to deployment managers", "depman-registry"};
    std::string targets_path;
    std::string listen = "127.0.0.1:7400";
    app.add_option("-t,--targets", targets_path, "targets.xml")->required()->check(CLI::ExistingFile);
    app.add_option("-l,--listen", listen, "host:port")->capture_default_str();
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

    std::unique_ptr<depman::RegistryServer> registry;
    try {
        std::ifstream in(targets_path, std::ios::binary);
        std::ostringstream text;
        text << in.rdbuf();
        registry = std::make_unique<depman::RegistryServer>(depman::parse_targets_xml(text.str()),
                                                            depman::wire::Endpoint::parse(listen));
    } catch (const depman::Error& e) {
        std::cerr << "depman-registry: " << e.what() << '\n';
        return 1;
    }
    std::cout << "registry serving " << registry->uri() << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    registry->stop();
    return 0;
}
