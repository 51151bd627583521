#include <string>
#include <vector>

#include "qgs/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qgs::cli_main(std::move(args));
}
