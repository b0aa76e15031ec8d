#include "ccgm/cli/pipeline.hpp"

int main(int argc, char** argv) { return ccgm::cli::main_with_args(argc, argv); }
