#include "fvrule/cli.hpp"

int main(int argc, char** argv) { return fvrule::cli::run(argc, argv); }
