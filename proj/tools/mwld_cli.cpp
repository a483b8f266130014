#include "mwld/cli.hpp"

int main(int argc, char** argv) { return mwld::cli::run(argc, argv); }
