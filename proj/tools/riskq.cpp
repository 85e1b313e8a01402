#include "riskq/cli.hpp"

int main(int argc, char** argv) { return riskq::cli::run(argc, argv); }
