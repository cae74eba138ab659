#include "ifit/cli/app.hpp"

int main(int argc, char** argv) { return ifit::cli::run(argc, argv); }
