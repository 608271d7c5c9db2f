#include "jprof/cli.hpp"

int main(int argc, char** argv) { return jprof::run_cli(argc, argv); }
