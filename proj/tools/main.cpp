#include "cpfos/cli.hpp"

int main(int argc, char** argv) { return cpfos::run_cli(argc, argv); }
