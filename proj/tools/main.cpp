#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) {
  int status = 0;
  const auto config = nmln::cli::parse_command_line(argc, argv, status);
  if (!config) return status;
  return nmln::cli::run(*config, std::cout, std::cerr);
}
