#include "lamb/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
	std::ios::sync_with_stdio(false);
	return lamb::run_cli(argc, argv, {std::cout, std::cerr});
}
