#include "cli.hpp"

int main(int argc, char** argv) { return scansnap::cli::dispatch(argc, argv); }
