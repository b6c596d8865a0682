#include <iostream>

#include "priorweaver/cli.hpp"

int main(int argc, char** argv) {
    return priorweaver::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
