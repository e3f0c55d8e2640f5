#include "adlgen/cli.hpp"

int main(int argc, char** argv) { return adlgen::run_cli(argc, argv); }
