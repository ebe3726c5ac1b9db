#include "carrytail/cli.hpp"

int main(int argc, char** argv) { return carrytail::cli::run(argc, argv); }
