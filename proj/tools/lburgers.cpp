#include "lattice_burgers/cli.hpp"

int main(int argc, char** argv) { return lattice_burgers::cli::run(argc, argv); }
