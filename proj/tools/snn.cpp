#include "snn/cli.hpp"

int main(int argc, char** argv) { return snn::cli::run_command(argc, argv); }
