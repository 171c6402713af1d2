#include "dem/scenarios_io.hpp"

int main(int argc, char** argv) { return dem::cli_main(argc, argv); }
