#include <iostream>

#include "uiharvest/cli.hpp"

int main(int argc, char** argv) {
  return uiharvest::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
