#include "defproj/cli.hpp"

int main(int argc, char** argv) { return defproj::cli::run(argc, argv); }
