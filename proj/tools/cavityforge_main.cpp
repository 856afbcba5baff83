#include "cavityforge/commands.hpp"

int main(int argc, char** argv) { return cavityforge::cli::run(argc, argv); }
