#include "cli.hpp"

int main(int argc, char** argv) { return geomdiff::cli::dispatch(argc, argv); }
