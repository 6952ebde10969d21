#include "pkgintel/cli.hpp"

int main(int argc, char** argv) { return pkgintel::run_subcommand(argc, argv); }
