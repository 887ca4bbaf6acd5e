#include "ggfps/cli.hpp"

int main(int argc, char** argv)
{
  return ggfps::cli::run(argc, argv);
}
