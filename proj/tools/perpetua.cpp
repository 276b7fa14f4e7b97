#include "cli_app.hpp"

int main(int argc, char** argv) { return perpetua::cli::run_cli(argc, argv); }
