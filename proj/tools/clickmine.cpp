#include "clickmine/cli.hpp"

int main(int argc, char** argv) { return clickmine::cli::main(argc, argv); }
