#include "mfsparse/cli.hpp"

int main(int argc, char** argv) { return mfsparse::run_cli(argc, argv); }
