#include <iostream>
#include <string>
#include <vector>

#include "agripolicy/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return agripolicy::cli::run(args, std::cout, std::cerr);
}
