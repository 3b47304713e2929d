#include "tall/cli.hpp"

int main(int argc, char** argv) { return tall::cli::dispatch(argc, argv); }
