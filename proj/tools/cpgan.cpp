#include "cpgan/cli/app.hpp"

int main(int argc, char** argv) { return cpgan::cli::run(argc, argv); }
