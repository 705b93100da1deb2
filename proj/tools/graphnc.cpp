#include "graphnc/cli.hpp"

int main(int argc, char** argv) { return graphnc::cli::run_main(argc, argv); }
