#include "echosim/cli.hpp"

int main(int argc, char** argv) {
    return echosim::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
