#include <string>
#include <vector>

#include "logic_orm/cli.hpp"

int main(int argc, char** argv) {
  return logic_orm::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
