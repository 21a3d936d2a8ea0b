#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparsenorm {

enum ExitCode : int {
    kExitOk = 0,
    kExitParse = 2,
    kExitValidation = 3,
    kExitIo = 4,
    kExitInternal = 5,
};

// Entry point of the command-line tool. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads one real per line; with column >= 0 lines are split on commas and
// that column is taken. Blank lines and '#' comments are skipped.
std::vector<double> read_vector_file(const std::string& path, int column = -1);

}  // namespace sparsenorm
