#include "cli_app.hpp"

int main(int argc, char** argv) { return nmvm::cli::run_cli(argc, argv); }
