#include <iostream>

#include "sdgcount_cli/app.hpp"

int main(int argc, char** argv) { return sdgcount::cli::run(argc, argv, std::cout, std::cerr); }
