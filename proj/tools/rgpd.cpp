#include "rgpd/cli/commands.hpp"

int main(int argc, char** argv) { return rgpd::run_cli(argc, argv); }
