#include <iostream>
#include <string>
#include <vector>

#include "idc/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return idc::cli::run(args, std::cout, std::cerr);
}
