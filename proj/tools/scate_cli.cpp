#include "scate/cli/commands.hpp"

int main(int argc, char** argv) { return scate::cli::run(argc, argv); }
