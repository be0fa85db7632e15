#include "forecast_forge/cli.hpp"

int main(int argc, char** argv) { return forecast_forge::cli::main_entry(argc, argv); }
