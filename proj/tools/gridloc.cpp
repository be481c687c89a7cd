#include <cstdio>

int main() {
  std::fprintf(stderr, "gridloc: command-line interface not wired up yet\n");
  return 2;
}
