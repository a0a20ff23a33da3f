#include "ellreg/commands.hpp"

int main(int argc, char** argv) { return ellreg::run_cli(argc, argv); }
