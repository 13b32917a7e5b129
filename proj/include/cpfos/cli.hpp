#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpfos {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitArgument = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Runs the command-line tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace cpfos
