#include "veracity/cli.hpp"

int main(int argc, char** argv) { return veracity::cli::run(argc, argv); }
