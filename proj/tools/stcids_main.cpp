#include "stcids/cli.hpp"

int main(int argc, char** argv) { return stcids::cli::run(argc, argv); }
