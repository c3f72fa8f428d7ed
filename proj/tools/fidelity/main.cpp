#include "cli.hpp"

int main(int argc, char** argv) { return fidelity::cli::run(std::vector<std::string>(argv, argv + argc)); }
