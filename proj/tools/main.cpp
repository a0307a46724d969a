#include "riskshield/cli.hpp"

int main(int argc, char** argv) {
    return riskshield::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
