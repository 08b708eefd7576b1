#include <iostream>
#include <string>
#include <vector>

#include "asm2tv/cli.hpp"

int main(int argc, char** argv) {
    return asm2tv::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
