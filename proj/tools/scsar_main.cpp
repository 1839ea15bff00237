#include "scsar/cli.hpp"

int main(int argc, char** argv) { return scsar::run_cli(argc, argv); }
