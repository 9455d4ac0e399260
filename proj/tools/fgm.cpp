#include <iostream>

#include "fgm/cli.hpp"

int main(int argc, char** argv) {
    return fgm::cli::run(argc, argv, std::cout, std::cerr);
}
