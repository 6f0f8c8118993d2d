#include "exflow/io.hpp"

int main(int argc, char** argv) { return exflow::run_cli(argc, argv); }
