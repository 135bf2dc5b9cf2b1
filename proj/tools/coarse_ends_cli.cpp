// Command-line front end. Subcommands land here as the library fills out.
#include <cstdio>

#include "coarse/covers.hpp"

int main() {
  std::puts("coarse-ends CLI: subcommands not wired yet");
  return 2;
}
