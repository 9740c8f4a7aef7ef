#include "finsup/cli.hpp"

int main(int argc, char** argv) { return finsup::cli::run(argc, argv); }
