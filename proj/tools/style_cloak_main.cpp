#include <vector>

#include "stylecloak/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return stylecloak::run_cli(args);
}
