#include "physmorph/cli.hpp"

int main(int argc, char** argv) { return physmorph::cli_main(argc, argv); }
