#include <iostream>
#include <string>
#include <vector>

#include "doicd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return doicd::cli::run(args, std::cout, std::cerr);
}
