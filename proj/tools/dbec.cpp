#include "dbec/cli.hpp"

int main(int argc, char** argv) { return dbec::cli::run(argc, argv); }
