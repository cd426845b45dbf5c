#include "vpcc/cli.hpp"

int main(int argc, char** argv) { return vpcc::cli::main(argc, argv); }
