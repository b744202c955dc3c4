#include "recdyn_cli.hpp"

int main(int argc, char** argv) { return recdyn::cli::run(argc, argv); }
