#include "gcca_cli.hpp"

int main(int argc, char** argv) { return gcca::cli::cli_main(argc, argv); }
