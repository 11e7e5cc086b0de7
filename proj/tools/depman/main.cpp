#include "cli.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::optional<std::string> env;
    if (const char* m = std::getenv("DEPMAN_MANAGER")) env = m;
    return depman::cli::run(args, std::cin, std::cout, std::cerr, env);
}
