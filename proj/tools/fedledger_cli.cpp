#include "fedledger/cli.hpp"

int main(int argc, char** argv) { return fedledger::cli::main(argc, argv); }
