#include "ssr/cli.hpp"

int main(int argc, char** argv) { return ssr::cli::dispatch(argc, argv); }
