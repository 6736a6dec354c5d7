#include "rhm/cli.hpp"

int main(int argc, char** argv) { return rhm::cli::run(argc, argv); }
