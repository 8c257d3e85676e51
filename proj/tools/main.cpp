#include "cli.hpp"

int main(int argc, char** argv) { return cellpp::cli::run(argc, argv); }
