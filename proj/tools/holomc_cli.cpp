#include "holomc/experiments.hpp"

int main(int argc, char** argv) { return holomc::cli_main(argc, argv); }
