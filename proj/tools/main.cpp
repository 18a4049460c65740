#include "prefopt/cli.hpp"

int main(int argc, char** argv) {
  return prefopt::run_cli({argv + 1, argv + argc});
}
