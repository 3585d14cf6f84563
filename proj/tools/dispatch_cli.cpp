#include <dispatch/cli_app.hpp>

int main(int argc, char** argv) { return dispatch::run_cli(argc, argv); }
