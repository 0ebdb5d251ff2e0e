#include <vector>

#include "aikd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return aikd::run_cli(args);
}
