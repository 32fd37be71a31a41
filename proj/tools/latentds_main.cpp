#include "latentds/cli.hpp"

int main(int argc, char** argv) { return latentds::cli::run(argc, argv); }
