#include "w2fair/cli.hpp"

int main(int argc, char** argv) { return w2fair::run_cli(argc, argv); }
