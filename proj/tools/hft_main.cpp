#include "hft/cli.hpp"

int main(int argc, char** argv) { return hft::cli::run(argc, argv); }
