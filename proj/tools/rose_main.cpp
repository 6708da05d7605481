#include <vector>

#include "rose/run.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rose::run::run_cli(args);
}
