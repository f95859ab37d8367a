#include "cli.hpp"

int main(int argc, char** argv) { return topicinf::cli::dispatch(argc, argv); }
