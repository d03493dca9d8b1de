#include "pastiche/cli.hpp"

int main(int argc, char** argv) { return pastiche::cli::cli_main(argc, argv); }
