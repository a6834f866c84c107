#include "latsim/cli.hpp"

int main(int argc, char** argv) { return latsim::run_cli(argc, argv); }
