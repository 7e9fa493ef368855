#include "uem/cli.hpp"

int main(int argc, char** argv) { return uem::cli::execute(argc, argv); }
