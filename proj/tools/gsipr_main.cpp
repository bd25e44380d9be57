#include "gsipr/cli.hpp"

int main(int argc, char** argv) { return gsipr::run_cli(argc, argv); }
