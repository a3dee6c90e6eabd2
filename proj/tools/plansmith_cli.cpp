#include "plansmith/cli.hpp"

int main(int argc, char** argv) { return plansmith::cli::main(argc, argv); }
