#include <vector>

#include "avqe/cli.hpp"

int main(int argc, char** argv) {
    return avqe::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
