#include <iostream>
#include <string>
#include <vector>

#include "anteriseg/cli.hpp"

int main(int argc, char** argv) {
    return anteriseg::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
