#include "emhd/io.hpp"

int main(int argc, char** argv) { return emhd::run_cli(argc, argv); }
