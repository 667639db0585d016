#include "portcast/commands.hpp"

int main(int argc, char** argv) { return portcast::cli::run_cli(argc, argv); }
